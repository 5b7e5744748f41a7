use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{ClassicalOracle, Domain};
use crate::{Error, Result};

/// Largest domain whose tables are enumerated explicitly.
pub const MAX_ENUM_POINTS: u64 = 24;

/// Exact weights over the values `[0, weights.len())` of a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDist {
    weights: Vec<BigRational>,
}

impl ValueDist {
    pub fn new(weights: Vec<BigRational>) -> Result<Self> {
        let total: BigRational = weights.iter().cloned().sum();
        if !total.is_one() || weights.iter().any(|w| *w < BigRational::zero()) {
            return Err(Error::InvalidParameter("value weights must be nonnegative and sum to 1".into()));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: u64) -> Self {
        let w = BigRational::new(1.into(), n.into());
        Self { weights: vec![w; n as usize] }
    }

    /// `1` with probability `eps`, else `0`.
    pub fn bernoulli(eps: &BigRational) -> Result<Self> {
        Self::new(vec![BigRational::one() - eps, eps.clone()])
    }

    /// Point mass on `value` within `[0, range)`.
    pub fn point(value: u64, range: u64) -> Self {
        let mut weights = vec![BigRational::zero(); range as usize];
        weights[value as usize] = BigRational::one();
        Self { weights }
    }

    pub fn range(&self) -> u64 {
        self.weights.len() as u64
    }

    pub fn weight(&self, v: u64) -> &BigRational {
        &self.weights[v as usize]
    }

    /// Values with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.weights.iter().enumerate().filter(|(_, w)| !w.is_zero()).map(|(v, w)| (v as u64, w))
    }
}

/// `D(H) = Π ε^{H(x)} (1-ε)^{1-H(x)}` over a domain.
#[derive(Debug, Clone)]
pub struct SparseOracleDist {
    epsilon: BigRational,
    domain: Arc<Domain>,
}

impl SparseOracleDist {
    pub fn new(epsilon: BigRational, domain: Arc<Domain>) -> Result<Self> {
        if epsilon < BigRational::zero() || epsilon > BigRational::one() {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} is not in [0, 1]")));
        }
        Ok(Self { epsilon, domain })
    }

    pub fn epsilon(&self) -> &BigRational {
        &self.epsilon
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn value_dist(&self) -> ValueDist {
        ValueDist::bernoulli(&self.epsilon).expect("epsilon validated")
    }

    /// Exact probability of one table.
    pub fn density(&self, oracle: &ClassicalOracle) -> Result<BigRational> {
        let ones = (0..self.domain.size()).filter(|&p| oracle.eval(p) == 1).count();
        Ok(self.weight_with_ones(ones))
    }

    fn weight_with_ones(&self, ones: usize) -> BigRational {
        let n = self.domain.size() as usize;
        pow(&self.epsilon, ones) * pow(&(BigRational::one() - &self.epsilon), n - ones)
    }

    /// Every table with its exact weight, in mask order (bit `i` is the
    /// value at point `i`). Weights sum to exactly one.
    pub fn enumerate_weighted(&self) -> Result<WeightedTables> {
        let n = self.domain.size();
        if n > MAX_ENUM_POINTS {
            return Err(Error::DomainTooLarge { size: n as u128, limit: MAX_ENUM_POINTS as u128 });
        }
        let by_ones = (0..=n as usize).map(|j| self.weight_with_ones(j)).collect();
        Ok(WeightedTables { domain: self.domain.clone(), next: 0, end: 1u64 << n, by_ones })
    }
}

pub struct WeightedTables {
    domain: Arc<Domain>,
    next: u64,
    end: u64,
    by_ones: Vec<BigRational>,
}

impl WeightedTables {
    pub fn count(&self) -> u64 {
        self.end
    }

    pub fn table(&self, mask: u64) -> (ClassicalOracle, BigRational) {
        let n = self.domain.size();
        let table: Vec<u64> = (0..n).map(|p| (mask >> p) & 1).collect();
        let oracle = ClassicalOracle::from_table(self.domain.clone(), 2, table).expect("bit table");
        (oracle, self.by_ones[mask.count_ones() as usize].clone())
    }
}

impl Iterator for WeightedTables {
    type Item = (ClassicalOracle, BigRational);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let item = self.table(self.next);
        self.next += 1;
        Some(item)
    }
}

fn pow(base: &BigRational, e: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= base;
    }
    acc
}

/// Distinguishing bound between a sparse oracle and the all-zero oracle for
/// `q`-query algorithms: `8 q² ε`.
pub fn sparse_vs_zero_bound(q: usize, eps: f64) -> f64 {
    8.0 * (q * q) as f64 * eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ratio;
    use proptest::prelude::*;

    #[test]
    fn two_point_weights() {
        let d = Arc::new(Domain::flat(2).unwrap());
        let dist = SparseOracleDist::new(ratio(1, 4), d).unwrap();
        let w: Vec<BigRational> = dist.enumerate_weighted().unwrap().map(|(_, w)| w).collect();
        assert_eq!(w, vec![ratio(9, 16), ratio(3, 16), ratio(3, 16), ratio(1, 16)]);
    }

    #[test]
    fn bound_example() {
        assert!((sparse_vs_zero_bound(1, 0.01) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn rejects_large_domains_and_bad_eps() {
        let big = Arc::new(Domain::flat(25).unwrap());
        assert!(SparseOracleDist::new(ratio(1, 2), big).unwrap().enumerate_weighted().is_err());
        let d = Arc::new(Domain::flat(2).unwrap());
        assert!(SparseOracleDist::new(ratio(3, 2), d).is_err());
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(num in 0i64..=8, n in 1u64..=6) {
            let d = Arc::new(Domain::flat(n).unwrap());
            let dist = SparseOracleDist::new(ratio(num, 8), d).unwrap();
            let total: BigRational = dist.enumerate_weighted().unwrap().map(|(_, w)| w).sum();
            prop_assert!(total.is_one());
            for (o, w) in dist.enumerate_weighted().unwrap() {
                prop_assert_eq!(dist.density(&o).unwrap(), w);
            }
        }
    }
}
