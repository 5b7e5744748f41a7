use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::field::{is_prime, Field};
use crate::oracle::{ClassicalOracle, Domain};
use crate::{Error, Result};

/// Largest key space the families agree to enumerate.
pub const MAX_KEYS: u128 = 1 << 24;

/// Keyed functions `[points] → [range]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum BaseFamily {
    /// Every function, keyed by its table (mixed radix, point 0 least significant).
    Table { points: u64, range: u64 },
    /// Polynomials with `coeffs` coefficients over `field`, reduced to
    /// `[range]` by taking low bits (binary fields) or directly (prime fields).
    Poly { field: Field, coeffs: usize, points: u64, range: u64 },
}

impl BaseFamily {
    pub fn table(points: u64, range: u64) -> Result<Self> {
        let keys = (range as u128).checked_pow(points as u32).unwrap_or(u128::MAX);
        if keys > MAX_KEYS || range == 0 {
            return Err(Error::DomainTooLarge { size: keys, limit: MAX_KEYS });
        }
        Ok(BaseFamily::Table { points, range })
    }

    /// A `coeffs`-wise independent polynomial family. The field is GF(2^n)
    /// when `range` is a power of two and GF(range) when `range` is prime.
    pub fn poly(points: u64, range: u64, coeffs: usize) -> Result<Self> {
        let field = if range.is_power_of_two() {
            let need = points.max(range).next_power_of_two().trailing_zeros().max(1);
            Field::binary(need)?
        } else if is_prime(range) && range >= points {
            Field::prime(range)?
        } else {
            return Err(Error::InvalidParameter(format!(
                "no exact polynomial family into [{range}] over {points} points"
            )));
        };
        let keys = (field.size() as u128).checked_pow(coeffs as u32).unwrap_or(u128::MAX);
        if keys > MAX_KEYS {
            return Err(Error::DomainTooLarge { size: keys, limit: MAX_KEYS });
        }
        Ok(BaseFamily::Poly { field, coeffs, points, range })
    }

    /// The smallest exact `2q`-wise independent family we know how to build:
    /// all functions when the domain has at most `2q` points, polynomials otherwise.
    pub fn for_queries(points: u64, range: u64, q: usize) -> Result<Self> {
        if points <= 2 * q as u64 {
            Self::table(points, range)
        } else {
            Self::poly(points, range, 2 * q)
        }
    }

    pub fn points(&self) -> u64 {
        match *self {
            BaseFamily::Table { points, .. } | BaseFamily::Poly { points, .. } => points,
        }
    }

    pub fn range(&self) -> u64 {
        match *self {
            BaseFamily::Table { range, .. } | BaseFamily::Poly { range, .. } => range,
        }
    }

    /// Independence order: any this many distinct points get jointly uniform values.
    pub fn independence(&self) -> usize {
        match *self {
            BaseFamily::Table { points, .. } => points as usize,
            BaseFamily::Poly { coeffs, .. } => coeffs,
        }
    }

    pub fn key_count(&self) -> u128 {
        match *self {
            BaseFamily::Table { points, range } => (range as u128).pow(points as u32),
            BaseFamily::Poly { field, coeffs, .. } => (field.size() as u128).pow(coeffs as u32),
        }
    }

    pub fn eval(&self, key: u128, point: u64) -> u64 {
        debug_assert!(point < self.points());
        match *self {
            BaseFamily::Table { range, .. } => (key / (range as u128).pow(point as u32) % range as u128) as u64,
            BaseFamily::Poly { field, coeffs, range, .. } => {
                let q = field.size() as u128;
                let mut rest = key;
                let cs: Vec<u64> = (0..coeffs)
                    .map(|_| {
                        let c = (rest % q) as u64;
                        rest /= q;
                        c
                    })
                    .collect();
                let v = field.eval_poly(&cs, point);
                match field {
                    Field::Binary { .. } => v & (range - 1),
                    Field::Prime { .. } => v,
                }
            }
        }
    }
}

/// The thresholded family `H̃_(κ′, a_1..a_k)(m_1..m_i) = [(H′_κ′(m_1..m_i) + a_i) mod A < B]`
/// on the prefix domain `M^{≤k}`; `[A]` is 0-based so the marginal is exactly `B/A`.
#[derive(Debug, Clone, Serialize)]
pub struct TwoQWiseFamily {
    base: BaseFamily,
    a: u64,
    b: u64,
    #[serde(skip)]
    domain: Arc<Domain>,
}

impl TwoQWiseFamily {
    pub fn new(base: BaseFamily, domain: Arc<Domain>, a: u64, b: u64) -> Result<Self> {
        if b == 0 || b > a {
            return Err(Error::InvalidParameter(format!("need 0 < B ≤ A, got B={b}, A={a}")));
        }
        if base.range() != a {
            return Err(Error::InvalidParameter("base family must map into [A]".into()));
        }
        if base.points() != domain.size() {
            return Err(Error::InvalidParameter("base family must cover the prefix domain".into()));
        }
        let fam = Self { base, a, b, domain };
        if fam.key_count() > MAX_KEYS {
            return Err(Error::DomainTooLarge { size: fam.key_count(), limit: MAX_KEYS });
        }
        Ok(fam)
    }

    /// Family for `ε = B/A` on the prefix domain over `alphabet` with `k` rounds,
    /// exact against `q`-query algorithms.
    pub fn for_epsilon(alphabet: u64, k: usize, eps: &BigRational, q: usize) -> Result<Self> {
        let (a, b) = epsilon_parts(eps)?;
        let domain = Arc::new(Domain::prefixes(alphabet, k)?);
        let base = BaseFamily::for_queries(domain.size(), a, q)?;
        Self::new(base, domain, a, b)
    }

    pub fn base(&self) -> &BaseFamily {
        &self.base
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn rounds(&self) -> usize {
        self.domain.max_len()
    }

    pub fn epsilon(&self) -> BigRational {
        BigRational::new(BigInt::from(self.b), BigInt::from(self.a))
    }

    pub fn key_count(&self) -> u128 {
        self.base.key_count().saturating_mul((self.a as u128).saturating_pow(self.rounds() as u32))
    }

    /// `(κ′, [a_1..a_k])` for a packed key; κ′ is the least significant part.
    pub fn split_key(&self, key: u128) -> (u128, Vec<u64>) {
        let kc = self.base.key_count();
        let mut rest = key / kc;
        let offsets = (0..self.rounds())
            .map(|_| {
                let v = (rest % self.a as u128) as u64;
                rest /= self.a as u128;
                v
            })
            .collect();
        (key % kc, offsets)
    }

    pub fn join_key(&self, base_key: u128, offsets: &[u64]) -> u128 {
        let a = offsets.iter().rev().fold(0u128, |acc, &v| acc * self.a as u128 + v as u128);
        a * self.base.key_count() + base_key
    }

    pub fn eval_parts(&self, base_key: u128, offsets: &[u64], point: u64) -> Result<bool> {
        let len = self.domain.len_of(point)?;
        Ok((self.base.eval(base_key, point) + offsets[len - 1]) % self.a < self.b)
    }

    pub fn eval(&self, key: u128, point: u64) -> Result<bool> {
        let (kb, offs) = self.split_key(key);
        self.eval_parts(kb, &offs, point)
    }

    pub fn oracle(&self, key: u128) -> Result<ClassicalOracle> {
        let table = (0..self.domain.size()).map(|p| self.eval(key, p).map(u64::from)).collect::<Result<_>>()?;
        ClassicalOracle::from_table(self.domain.clone(), 2, table)
    }

    /// `Pr_κ[H̃_κ(point) = 1]` by counting keys.
    pub fn marginal(&self, point: u64) -> Result<BigRational> {
        let mut hits = 0u128;
        for key in 0..self.key_count() {
            hits += self.eval(key, point)? as u128;
        }
        Ok(BigRational::new(BigInt::from(hits), BigInt::from(self.key_count())))
    }
}

/// `(A, B)` with `ε = B/A` in lowest terms.
pub fn epsilon_parts(eps: &BigRational) -> Result<(u64, u64)> {
    let to_u64 = |v: &BigInt| u64::try_from(v).map_err(|_| Error::InvalidParameter(format!("ε = {eps} out of range")));
    let (b, a) = (to_u64(eps.numer())?, to_u64(eps.denom())?);
    if b == 0 || b > a {
        return Err(Error::InvalidParameter(format!("ε = {eps} must lie in (0, 1]")));
    }
    Ok((a, b))
}

/// Whether the values of `family` on `points` are jointly uniform over
/// `[range]^points` when the key is uniform, by counting every key.
pub fn is_jointly_uniform(family: &BaseFamily, points: &[u64]) -> bool {
    let mut counts: BTreeMap<Vec<u64>, u128> = BTreeMap::new();
    for key in 0..family.key_count() {
        *counts.entry(points.iter().map(|&p| family.eval(key, p)).collect()).or_default() += 1;
    }
    let cells = (family.range() as u128).pow(points.len() as u32);
    counts.len() as u128 == cells && counts.values().all(|&c| c * cells == family.key_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ratio;

    fn subsets(n: u64, size: usize) -> Vec<Vec<u64>> {
        if size == 0 {
            return vec![vec![]];
        }
        (0..n)
            .flat_map(|last| {
                subsets(last, size - 1).into_iter().map(move |mut s| {
                    s.push(last);
                    s
                })
            })
            .collect()
    }

    #[test]
    fn polynomial_families_are_exactly_independent() {
        for (points, range, coeffs) in [(6, 2, 2), (6, 4, 2), (6, 2, 4), (11, 11, 2), (13, 13, 3), (8, 8, 4)] {
            let fam = BaseFamily::poly(points, range, coeffs).unwrap();
            for size in 1..=coeffs {
                for s in subsets(points, size) {
                    assert!(is_jointly_uniform(&fam, &s), "{fam:?} on {s:?}");
                }
            }
        }
    }

    #[test]
    fn polynomial_family_is_not_more_independent_than_claimed() {
        let fam = BaseFamily::poly(8, 8, 2).unwrap();
        assert!(!subsets(8, 3).iter().all(|s| is_jointly_uniform(&fam, s)));
    }

    #[test]
    fn table_family_is_all_functions() {
        let fam = BaseFamily::for_queries(4, 3, 2).unwrap();
        assert_eq!(fam.key_count(), 81);
        assert!(is_jointly_uniform(&fam, &[0, 1, 2, 3]));
    }

    #[test]
    fn marginal_is_b_over_a() {
        for eps in [ratio(1, 4), ratio(1, 2), ratio(3, 4), ratio(1, 1)] {
            let fam = TwoQWiseFamily::for_epsilon(2, 2, &eps, 1).unwrap();
            for p in 0..fam.domain().size() {
                assert_eq!(fam.marginal(p).unwrap(), eps);
            }
        }
    }

    #[test]
    fn key_roundtrip() {
        let fam = TwoQWiseFamily::for_epsilon(2, 2, &ratio(1, 4), 1).unwrap();
        for key in [0, 17, fam.key_count() - 1] {
            let (kb, offs) = fam.split_key(key);
            assert_eq!(fam.join_key(kb, &offs), key);
        }
    }

    #[test]
    fn rejects_inexact_reductions() {
        assert!(BaseFamily::poly(6, 6, 2).is_err());
        assert!(epsilon_parts(&ratio(0, 1)).is_err());
    }
}
