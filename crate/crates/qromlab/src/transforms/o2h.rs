use std::collections::BTreeSet;

use serde::Serialize;

use super::mar::FLOAT_SLACK;
use crate::adversary::exec::{self, measure_input, Branch, Interceptor, Prepared, Slot};
use crate::adversary::{OracleAlgorithm, Query};
use crate::oracle::{ClassicalOracle, Domain};
use crate::par::{self, Parallelism};
use crate::Result;

/// Measures the `j`-th query with label 0 and records it under tag 0.
struct MeasureAt(usize);

impl Interceptor for MeasureAt {
    fn before_query(&self, q: &Query, j: usize, branch: Branch, out: &mut Vec<Prepared>) -> Result<()> {
        if q.label != 0 || j != self.0 {
            out.push(Prepared { branch, after: Vec::new() });
            return Ok(());
        }
        for (p, mut b) in measure_input(q, branch)? {
            b.measured.push((0, p));
            out.push(Prepared { branch: b, after: Vec::new() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct O2hCheck {
    pub algorithm: String,
    pub set: Vec<u64>,
    pub q: usize,
    /// `Pr[C(z) ∈ S]`.
    pub p_c: f64,
    /// `Pr[A^{F_S}(z) ∈ S]`.
    pub p_a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// The indicator of `set` as an oracle.
pub fn indicator(domain: std::sync::Arc<Domain>, set: &BTreeSet<u64>) -> ClassicalOracle {
    let set = set.clone();
    ClassicalOracle::from_fn(domain, 2, move |p| u64::from(set.contains(&p)))
}

/// Exact success of the coin-flip wrapper `C` and of `A^{F_S}`, where
/// success means the algorithm's first output lies in `set`.
///
/// `C` flips `b`: on `b = 0` it runs `A` with `F_∅`; on `b = 1` it runs `A`
/// with `F_∅` and outputs the measured input of a uniformly random query.
pub fn o2h_corollary_c(alg: &OracleAlgorithm, set: &BTreeSet<u64>, mode: Parallelism) -> Result<O2hCheck> {
    let domain = std::sync::Arc::new(Domain::flat(alg.layout.dim(0))?);
    let hit = |b: &Branch, d: &[u64]| -> bool {
        let _ = b;
        set.contains(&(alg.output)(d)[0])
    };
    let with_s = alg.run(Slot::fixed(indicator(domain.clone(), set)), &exec::Transparent)?;
    let p_a = exec::probability_where(&with_s, hit);
    let empty = indicator(domain, &BTreeSet::new());
    let plain = alg.run(Slot::fixed(empty.clone()), &exec::Transparent)?;
    let p_plain = exec::probability_where(&plain, hit);
    let q = alg.queries;
    let measured: Vec<f64> = par::try_map(mode, (0..q).collect(), |j| -> Result<f64> {
        let out = alg.run(Slot::fixed(empty.clone()), &MeasureAt(j))?;
        Ok(exec::probability_where(&out, |b, _| b.measured.first().and_then(|m| m.1).is_some_and(|p| set.contains(&p))))
    })?;
    let p_meas = if q == 0 { 0.0 } else { measured.iter().sum::<f64>() / q as f64 };
    let p_c = 0.5 * p_plain + 0.5 * p_meas;
    let lhs = p_c.sqrt();
    let rhs = p_a / (4.0 * ((q + 1) as f64).sqrt());
    Ok(O2hCheck {
        algorithm: alg.name.clone(),
        set: set.iter().copied().collect(),
        q,
        p_c,
        p_a,
        lhs,
        rhs,
        pass: lhs + FLOAT_SLACK >= rhs,
    })
}

/// Every subset of `[0, n)` with at most `max` elements.
pub fn small_subsets(n: u64, max: usize) -> Vec<BTreeSet<u64>> {
    let mut out = vec![BTreeSet::new()];
    for size in 1..=max {
        let mut next = Vec::new();
        for s in out.iter().filter(|s| s.len() == size - 1) {
            let start = s.iter().next_back().map_or(0, |&m| m + 1);
            for v in start..n {
                let mut t = s.clone();
                t.insert(v);
                next.push(t);
            }
        }
        out.extend(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::zoo::single_zoo;

    #[test]
    fn subsets_up_to_two() {
        assert_eq!(small_subsets(3, 2).len(), 1 + 3 + 3);
    }

    #[test]
    fn empty_set_is_vacuous() {
        for alg in single_zoo(3, 2, 2).unwrap() {
            let c = o2h_corollary_c(&alg, &BTreeSet::new(), Parallelism::Sequential).unwrap();
            assert_eq!(c.p_a, 0.0);
            assert_eq!(c.p_c, 0.0);
        }
    }

    #[test]
    fn classical_finder_of_the_marked_point() {
        // Queries 2 and outputs X = 2: the output is in S whatever the oracle.
        let alg = single_zoo(3, 2, 1).unwrap().into_iter().find(|a| a.name == "classical(2)").unwrap();
        let c = o2h_corollary_c(&alg, &BTreeSet::from([2]), Parallelism::Sequential).unwrap();
        assert_eq!(c.p_a, 1.0);
        assert!((c.p_c - 1.0).abs() < 1e-12);
        assert!(c.pass);
    }

    #[test]
    fn zoo_satisfies_the_corollary() {
        for alg in single_zoo(3, 2, 2).unwrap() {
            for s in small_subsets(3, 2) {
                let c = o2h_corollary_c(&alg, &s, Parallelism::Sequential).unwrap();
                assert!(c.pass, "{c:?}");
            }
        }
    }
}
