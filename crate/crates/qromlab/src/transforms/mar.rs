use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::schedule::{mar_factor, MarSchedule};
use crate::adversary::exec::{measure_input, Branch, Interceptor, Prepared, Reprogram, Slot};
use crate::adversary::{OracleAlgorithm, Query};
use crate::oracle::{to_f64, ClassicalOracle, Domain};
use crate::par::{self, Parallelism};
use crate::{Error, Result};

/// Slack allowed when comparing two exact quantities computed in doubles.
pub const FLOAT_SLACK: f64 = 1e-10;

/// Value to program at a measured point for target `i`; `None` leaves the
/// oracle alone. May also mark the branch, e.g. as aborted.
pub type ValueFn = Arc<dyn Fn(usize, u64, &mut Branch) -> Result<Option<u64>> + Send + Sync>;

/// Measures the queries a schedule picks (among those with `label`) and
/// reprograms `slot` at the outcome, before or after answering.
pub struct MarInterceptor {
    pub label: usize,
    pub slot: usize,
    pub schedule: MarSchedule,
    pub value: ValueFn,
}

impl MarInterceptor {
    /// Reprogram to `ys[i]` for target `i`.
    pub fn with_targets(label: usize, slot: usize, schedule: MarSchedule, ys: Vec<u64>) -> Self {
        let ys = Arc::new(ys);
        Self { label, slot, schedule, value: Arc::new(move |i, _, _| Ok(Some(ys[i]))) }
    }
}

impl Interceptor for MarInterceptor {
    fn before_query(&self, q: &Query, j: usize, branch: Branch, out: &mut Vec<Prepared>) -> Result<()> {
        let hit = if q.label == self.label { self.schedule.target_of(j) } else { None };
        let Some((i, pick)) = hit else {
            out.push(Prepared { branch, after: Vec::new() });
            return Ok(());
        };
        for (point, mut b) in measure_input(q, branch)? {
            b.measured.push((i, point));
            let mut after = Vec::new();
            if let Some(p) = point {
                if let Some(v) = (self.value)(i, p, &mut b)? {
                    if pick.b == 0 {
                        b.slots[self.slot].reprogram(p, v)?;
                    } else {
                        after.push(Reprogram { slot: self.slot, point: p, value: v });
                    }
                }
            }
            out.push(Prepared { branch: b, after });
        }
        Ok(())
    }
}

/// What target `i` measured: `None` if nothing was measured for it,
/// `Some(None)` if the query was inactive on this branch.
pub fn measured_point(branch: &Branch, i: usize) -> Option<Option<u64>> {
    branch.measured.iter().rev().find(|(t, _)| *t == i).map(|&(_, p)| p)
}

/// Claimed points (`None` for ⊥) and auxiliary output.
pub type GeneralOutcome = (Vec<Option<u64>>, Vec<u64>);

/// Exact output distribution of the general measure-and-reprogram wrapper
/// `Ã[H, y]`, averaged uniformly over every schedule.
///
/// The first `k = ys.len()` entries of the algorithm's output are its
/// claimed points; for a target with `j_i = ⊥` the claim is taken from
/// there, otherwise from the measurement.
pub fn mar_general(alg: &OracleAlgorithm, h: &ClassicalOracle, ys: &[u64], mode: Parallelism) -> Result<BTreeMap<GeneralOutcome, f64>> {
    let k = ys.len();
    let schedules = MarSchedule::all(k, alg.queries)?;
    let share = 1.0 / schedules.len() as f64;
    let parts = par::try_map(mode, schedules, |s| -> Result<BTreeMap<GeneralOutcome, f64>> {
        let icpt = MarInterceptor::with_targets(0, 0, s.clone(), ys.to_vec());
        let branches = alg.run(Slot::fixed(h.clone()), &icpt)?;
        Ok(crate::adversary::exec::distribution(&branches, |b, d| {
            let out = (alg.output)(d);
            let claimed = (0..k)
                .map(|i| match s.picks[i] {
                    None => Some(out[i]),
                    Some(_) => measured_point(b, i).flatten(),
                })
                .collect();
            (claimed, out[k..].to_vec())
        }))
    })?;
    Ok(merge(parts, share))
}

fn merge<K: Ord>(parts: Vec<BTreeMap<K, f64>>, share: f64) -> BTreeMap<K, f64> {
    let mut out = BTreeMap::new();
    for part in parts {
        for (key, p) in part {
            *out.entry(key).or_insert(0.0) += share * p;
        }
    }
    out
}

/// One instance of the measure-and-reprogram inequality.
#[derive(Debug, Clone, Serialize)]
pub struct MarCheck {
    pub algorithm: String,
    pub target: Vec<u64>,
    pub y: Vec<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub factor: f64,
    pub pass: bool,
}

impl MarCheck {
    fn new(algorithm: &str, target: Vec<u64>, y: Vec<u64>, lhs: f64, rhs: f64, factor: f64) -> Self {
        let pass = lhs + FLOAT_SLACK >= factor * rhs;
        Self { algorithm: algorithm.into(), target, y, lhs, rhs, factor, pass }
    }
}

fn tuples(base: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out.into_iter().flat_map(|t| (0..base).map(move |v| [t.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Check `Pr[Ã[H,y] → (x*, z) ∧ V] ≥ Pr[A^{H_{x*,y}} → (x*, z) ∧ V]/(2q+1)^{2k}`
/// for every `y` and every `x*` with distinct entries.
pub fn check_mar_general<V>(alg: &OracleAlgorithm, h: &ClassicalOracle, k: usize, pred: V, mode: Parallelism) -> Result<Vec<MarCheck>>
where
    V: Fn(&[u64], &[u64], &[u64]) -> bool,
{
    let factor = to_f64(&mar_factor(k, alg.queries));
    let mut checks = Vec::new();
    for y in tuples(h.range(), k) {
        let dist = mar_general(alg, h, &y, mode)?;
        for x in tuples(h.domain().size(), k) {
            let mut sorted = x.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() < k {
                continue;
            }
            let lhs: f64 = dist
                .iter()
                .filter(|((c, z), _)| c.iter().zip(&x).all(|(c, x)| *c == Some(*x)) && pred(&x, &y, z))
                .map(|(_, p)| p)
                .sum();
            let events: Vec<(u64, u64)> = x.iter().copied().zip(y.iter().copied()).collect();
            let reprogrammed = h.reprogram_many(&events)?;
            let rhs: f64 = alg
                .distribution(&reprogrammed)?
                .iter()
                .filter(|(o, _)| o[..k] == x[..] && pred(&x, &y, &o[k..]))
                .map(|(_, p)| p)
                .sum();
            checks.push(MarCheck::new(&alg.name, x, y.clone(), lhs, rhs, factor));
        }
    }
    Ok(checks)
}

/// Outcome of the ordered wrapper on one basis state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MarOutcome {
    /// `x′_1..x′_k`; `None` where a picked query was inactive.
    pub points: Vec<Option<Vec<u64>>>,
    /// `x′_k` if every `x′_i` is a prefix of it, else `None` (⊥).
    pub output: Option<Vec<u64>>,
}

impl MarOutcome {
    pub fn new(points: Vec<Option<Vec<u64>>>) -> Self {
        let last = points.last().cloned().flatten();
        let output = last.filter(|l| points.iter().all(|p| p.as_ref().is_some_and(|p| Domain::is_prefix(p, l))));
        Self { points, output }
    }
}

/// Claimed prefixes for one basis state: measured where the schedule picks
/// a query, else the length-`i` prefix of the transcript `out`.
pub fn ordered_points(domain: &Domain, schedule: &MarSchedule, branch: &Branch, out: &[u64]) -> Result<Vec<Option<Vec<u64>>>> {
    (0..schedule.k())
        .map(|i| match schedule.picks[i] {
            None => Ok(Some(out[..=i].to_vec())),
            Some(_) => measured_point(branch, i).flatten().map(|p| domain.point(p)).transpose(),
        })
        .collect()
}

/// Exact outcome distribution of the ordered wrapper `Ã^ord[H, y]`; the
/// algorithm's first `k` outputs are a transcript in `M^k`.
pub fn mar_ordered(alg: &OracleAlgorithm, h: &ClassicalOracle, ys: &[u64], mode: Parallelism) -> Result<BTreeMap<MarOutcome, f64>> {
    let k = ys.len();
    let domain = h.domain().clone();
    if domain.max_len() < k {
        return Err(Error::InvalidParameter("ordered wrapper needs an oracle on M^{≤k}".into()));
    }
    let schedules = MarSchedule::all(k, alg.queries)?;
    let share = 1.0 / schedules.len() as f64;
    let parts = par::try_map(mode, schedules, |s| -> Result<BTreeMap<MarOutcome, f64>> {
        let icpt = MarInterceptor::with_targets(0, 0, s.clone(), ys.to_vec());
        let branches = alg.run(Slot::fixed(h.clone()), &icpt)?;
        let mut dist = BTreeMap::new();
        for b in &branches {
            let part = crate::adversary::exec::distribution(std::slice::from_ref(b), |_, d| (alg.output)(d));
            for (out, p) in part {
                let key = MarOutcome::new(ordered_points(&domain, &s, b, &out)?);
                *dist.entry(key).or_insert(0.0) += p;
            }
        }
        Ok(dist)
    })?;
    Ok(merge(parts, share))
}

/// Check the ordered inequality for every `y` and every `x* ∈ M^k`, with
/// `H^ord_{x*,y}` programmed to `y_i` at the length-`i` prefix of `x*`.
pub fn check_mar_ordered(alg: &OracleAlgorithm, h: &ClassicalOracle, k: usize, mode: Parallelism) -> Result<Vec<MarCheck>> {
    let factor = to_f64(&mar_factor(k, alg.queries));
    let domain = h.domain().clone();
    let mut checks = Vec::new();
    for y in tuples(h.range(), k) {
        let dist = mar_ordered(alg, h, &y, mode)?;
        for x in tuples(domain.alphabet(), k) {
            let lhs: f64 = dist.iter().filter(|(o, _)| o.output.as_deref() == Some(&x[..])).map(|(_, p)| p).sum();
            let events: Vec<(u64, u64)> = domain.prefix_indices(&x)?.into_iter().zip(y.iter().copied()).collect();
            let rhs: f64 = alg.distribution(&h.reprogram_many(&events)?)?.iter().filter(|(o, _)| o[..k] == x[..]).map(|(_, p)| p).sum();
            checks.push(MarCheck::new(&alg.name, x, y.clone(), lhs, rhs, factor));
        }
    }
    Ok(checks)
}

/// `Pr[⊥]` of the ordered wrapper.
pub fn bottom_probability(dist: &BTreeMap<MarOutcome, f64>) -> f64 {
    dist.iter().filter(|(o, _)| o.output.is_none()).map(|(_, p)| p).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::zoo::{pair_zoo, prefix_zoo, single_zoo};

    fn flat(n: u64) -> Arc<Domain> {
        Arc::new(Domain::flat(n).unwrap())
    }

    #[test]
    fn zero_queries_is_the_algorithm_itself() {
        let h = ClassicalOracle::zero(flat(2), 2).unwrap();
        let alg = single_zoo(2, 2, 0).unwrap().remove(0);
        for c in check_mar_general(&alg, &h, 1, |_, _, _| true, Parallelism::Sequential).unwrap() {
            assert!((c.lhs - c.rhs).abs() < 1e-12);
            assert_eq!(c.factor, 1.0);
        }
    }

    #[test]
    fn one_classical_query_meets_one_ninth() {
        // Queries x* = 0 and reports whether the answer equals y.
        let h = ClassicalOracle::zero(flat(2), 2).unwrap();
        let alg = single_zoo(2, 2, 1).unwrap().into_iter().find(|a| a.name == "classical(0)").unwrap();
        let checks = check_mar_general(&alg, &h, 1, |_, y, z| z[0] == y[0], Parallelism::Sequential).unwrap();
        let c = checks.iter().find(|c| c.target == [0] && c.y == [1]).unwrap();
        assert_eq!(c.rhs, 1.0);
        assert!(c.lhs >= 1.0 / 9.0 - 1e-12);
        // ⊥: A's own claim with H untouched (answer 0): fails. Measure with b = 0:
        // reprogram first, answer 1: succeeds. b = 1: answer 0: fails.
        assert!((c.lhs - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reprogram_timing_is_observable() {
        let h = ClassicalOracle::zero(flat(2), 2).unwrap();
        for name in ["classical(0)", "adaptive"] {
            let alg = single_zoo(2, 2, 2).unwrap().into_iter().find(|a| a.name == name).unwrap();
            let run = |b: u8| {
                let s = MarSchedule::new(alg.queries, vec![Some(super::super::Pick { j: 0, b })]).unwrap();
                let icpt = MarInterceptor::with_targets(0, 0, s, vec![1]);
                let out = alg.run(Slot::fixed(h.clone()), &icpt).unwrap();
                crate::adversary::exec::distribution(&out, |_, d| (d[0], d[1]))
                    .into_iter()
                    .map(|(k, p)| (k, (p * 1e9).round() as i64))
                    .collect::<BTreeMap<_, _>>()
            };
            assert_ne!(run(0), run(1), "{name}");
        }
    }

    #[test]
    fn general_inequality_over_small_zoos() {
        let h = ClassicalOracle::from_table(flat(2), 2, vec![0, 1]).unwrap();
        for alg in single_zoo(2, 2, 2).unwrap() {
            for c in check_mar_general(&alg, &h, 1, |_, y, z| z[0] == y[0], Parallelism::Sequential).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
        for alg in pair_zoo(2, 2, 2).unwrap() {
            for c in check_mar_general(&alg, &h, 2, |_, _, _| true, Parallelism::Sequential).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn ordered_inequality_and_bottom() {
        let dom = Arc::new(Domain::prefixes(2, 2).unwrap());
        let h = ClassicalOracle::zero(dom, 2).unwrap();
        for alg in prefix_zoo(2, 2).unwrap() {
            for c in check_mar_ordered(&alg, &h, 2, Parallelism::Sequential).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
        let bad = prefix_zoo(2, 2).unwrap().into_iter().find(|a| a.name == "inconsistent").unwrap();
        let dist = mar_ordered(&bad, &h, &[1, 1], Parallelism::Sequential).unwrap();
        // ⊥ exactly when some target measures the first query: 12 of 17 schedules.
        assert!((bottom_probability(&dist) - 12.0 / 17.0).abs() < 1e-12);
    }
}
