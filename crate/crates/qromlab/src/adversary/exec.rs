use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;

use super::program::{Query, Step};
use crate::oracle::{to_f64, ClassicalOracle, Domain, ValueDist};
use crate::qsim::StateVector;
use crate::{Error, Result};

/// Cap on the number of live branches in one run.
pub const MAX_BRANCHES: usize = 1 << 18;

/// An oracle as seen by one branch.
///
/// A lazy slot has only its `assigned` points fixed; the first query that
/// touches another point branches over that point's value distribution with
/// exact weights. This is exact because the points of a lazy oracle are
/// independent and an untouched point never influences the state.
#[derive(Debug, Clone)]
pub struct Slot {
    pub oracle: ClassicalOracle,
    pub lazy: Option<Arc<ValueDist>>,
    pub assigned: BTreeSet<u64>,
}

impl Slot {
    pub fn fixed(oracle: ClassicalOracle) -> Self {
        Self { oracle, lazy: None, assigned: BTreeSet::new() }
    }

    pub fn lazy(domain: Arc<Domain>, dist: ValueDist) -> Result<Self> {
        let oracle = ClassicalOracle::zero(domain, dist.range())?;
        Ok(Self { oracle, lazy: Some(Arc::new(dist)), assigned: BTreeSet::new() })
    }

    pub fn reprogram(&mut self, point: u64, value: u64) -> Result<()> {
        self.oracle = self.oracle.reprogram(point, value)?;
        self.assigned.insert(point);
        Ok(())
    }

    fn needs(&self, point: u64) -> bool {
        self.lazy.is_some() && !self.assigned.contains(&point)
    }
}

/// One classical branch of a run: an exact weight, an unnormalized state
/// whose squared norm is the quantum probability of the branch's history,
/// and everything the reductions record along the way.
#[derive(Debug, Clone)]
pub struct Branch {
    pub weight: BigRational,
    pub state: StateVector,
    pub slots: Vec<Slot>,
    /// Queries made so far, per label.
    pub counts: Vec<usize>,
    pub calls: usize,
    /// Query inputs measured by an interceptor, tagged by the interceptor.
    pub measured: Vec<(usize, Option<u64>)>,
    /// `(register, outcome)` for every `Measure` step.
    pub outcomes: Vec<(usize, u64)>,
    /// Messages a cheating prover has committed to an external verifier.
    pub sent: Vec<u64>,
    pub aborted: bool,
}

impl Branch {
    pub fn new(state: StateVector, slots: Vec<Slot>) -> Self {
        Self {
            weight: BigRational::one(),
            state,
            slots,
            counts: Vec::new(),
            calls: 0,
            measured: Vec::new(),
            outcomes: Vec::new(),
            sent: Vec::new(),
            aborted: false,
        }
    }

    pub fn with_weight(mut self, w: BigRational) -> Self {
        self.weight = w;
        self
    }

    pub fn probability(&self) -> f64 {
        to_f64(&self.weight) * self.state.norm_sqr()
    }

    pub fn count(&self, label: usize) -> usize {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn outcome(&self, register: usize) -> Option<u64> {
        self.outcomes.iter().rev().find(|(r, _)| *r == register).map(|&(_, v)| v)
    }

    fn bump(&mut self, label: usize) -> usize {
        if self.counts.len() <= label {
            self.counts.resize(label + 1, 0);
        }
        self.counts[label] += 1;
        self.counts[label] - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reprogram {
    pub slot: usize,
    pub point: u64,
    pub value: u64,
}

/// A branch ready for its query, plus reprogramming to do right after it.
#[derive(Debug)]
pub struct Prepared {
    pub branch: Branch,
    pub after: Vec<Reprogram>,
}

/// Hook run before every query; `j` is the 0-based index of this query
/// among those with the same label.
pub trait Interceptor: Sync {
    fn before_query(&self, q: &Query, j: usize, branch: Branch, out: &mut Vec<Prepared>) -> Result<()>;
}

/// Lets every query through untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct Transparent;

impl Interceptor for Transparent {
    fn before_query(&self, _q: &Query, _j: usize, branch: Branch, out: &mut Vec<Prepared>) -> Result<()> {
        out.push(Prepared { branch, after: Vec::new() });
        Ok(())
    }
}

/// Partition a state's support by `key`, in key order.
pub fn split_by<K, F>(state: &StateVector, key: F) -> Result<Vec<(K, StateVector)>>
where
    K: Ord,
    F: Fn(&[u64]) -> K,
{
    let layout = state.layout().clone();
    let mut groups: BTreeMap<K, Vec<(u128, crate::qsim::C64)>> = BTreeMap::new();
    let mut digits = Vec::with_capacity(layout.len());
    for (idx, a) in state.entries() {
        layout.decode_into(idx, &mut digits);
        groups.entry(key(&digits)).or_default().push((idx, a));
    }
    groups.into_iter().map(|(k, e)| Ok((k, StateVector::from_entries(layout.clone(), e)?))).collect()
}

/// Measure the input of `q`: one branch per observed value, `None` for
/// basis states on which the query is inactive.
pub fn measure_input(q: &Query, branch: Branch) -> Result<Vec<(Option<u64>, Branch)>> {
    let parts = split_by(&branch.state, |d| (q.input)(d))?;
    Ok(parts
        .into_iter()
        .map(|(k, s)| {
            let mut b = branch.clone();
            b.state = s;
            (k, b)
        })
        .collect())
}

fn expand_lazy(q: &Query, branch: Branch) -> Result<Vec<Branch>> {
    let slot = &branch.slots[q.slot];
    let Some(dist) = slot.lazy.clone() else {
        return Ok(vec![branch]);
    };
    let mut fresh = BTreeSet::new();
    let layout = branch.state.layout().clone();
    let mut digits = Vec::with_capacity(layout.len());
    for (idx, _) in branch.state.entries() {
        layout.decode_into(idx, &mut digits);
        if let Some(p) = (q.read)(&digits) {
            if slot.needs(p) {
                fresh.insert(p);
            }
        }
    }
    let mut out = vec![branch];
    for p in fresh {
        let mut next = Vec::with_capacity(out.len() * dist.range() as usize);
        for b in out {
            for (v, w) in dist.support() {
                let mut c = b.clone();
                c.slots[q.slot].reprogram(p, v)?;
                c.weight = &c.weight * w;
                next.push(c);
            }
        }
        if next.len() > MAX_BRANCHES {
            return Err(Error::StrategySpaceTooLarge(format!("lazy oracle expansion exceeds {MAX_BRANCHES} branches")));
        }
        out = next;
    }
    Ok(out)
}

fn apply_query(q: &Query, branch: &mut Branch) -> Result<()> {
    let oracle = &branch.slots[q.slot].oracle;
    branch.state = branch.state.apply_map(|d| {
        if let Some(p) = (q.read)(d) {
            let v = oracle.try_eval(p)?;
            (q.add)(d, v);
        }
        Ok(())
    })?;
    Ok(())
}

/// Run `steps` on every branch, in order, and return the final branches.
///
/// Branches whose state becomes zero are dropped.
pub fn run(steps: &[Step], branches: Vec<Branch>, icpt: &dyn Interceptor) -> Result<Vec<Branch>> {
    let mut live = branches;
    for step in steps {
        let mut next = Vec::with_capacity(live.len());
        for mut b in live {
            match step {
                Step::Unitary { targets, u, control } => {
                    b.state = b.state.apply_unitary_at(targets, u, *control)?;
                    next.push(b);
                }
                Step::Map { fwd, .. } => {
                    b.state = b.state.apply_map(|d| fwd(d))?;
                    next.push(b);
                }
                Step::Columns { fwd, .. } => {
                    b.state = b.state.apply_columns(|d, out| fwd(d, out))?;
                    next.push(b);
                }
                Step::Measure(reg) => {
                    let reg = *reg;
                    for (v, s) in split_by(&b.state, |d| d[reg])? {
                        let mut c = b.clone();
                        c.state = s;
                        c.outcomes.push((reg, v));
                        next.push(c);
                    }
                }
                Step::Call => {
                    b.calls += 1;
                    next.push(b);
                }
                Step::Query(q) => {
                    let j = b.bump(q.label);
                    let mut prepared = Vec::new();
                    icpt.before_query(q, j, b, &mut prepared)?;
                    for Prepared { branch, after } in prepared {
                        for mut c in expand_lazy(q, branch)? {
                            apply_query(q, &mut c)?;
                            for r in &after {
                                c.slots[r.slot].reprogram(r.point, r.value)?;
                            }
                            next.push(c);
                        }
                    }
                }
            }
        }
        next.retain(|b| b.state.nnz() > 0);
        if next.len() > MAX_BRANCHES {
            return Err(Error::StrategySpaceTooLarge(format!("run exceeds {MAX_BRANCHES} branches")));
        }
        live = next;
    }
    Ok(live)
}

/// Total probability of the branches, in branch order.
pub fn total_probability(branches: &[Branch]) -> f64 {
    branches.iter().map(Branch::probability).sum()
}

/// Distribution of `key` over every (branch, basis state) pair.
pub fn distribution<K, F>(branches: &[Branch], key: F) -> BTreeMap<K, f64>
where
    K: Ord,
    F: Fn(&Branch, &[u64]) -> K,
{
    let mut out = BTreeMap::new();
    for b in branches {
        let w = to_f64(&b.weight);
        let layout = b.state.layout();
        let mut digits = Vec::with_capacity(layout.len());
        for (idx, a) in b.state.entries() {
            layout.decode_into(idx, &mut digits);
            *out.entry(key(b, &digits)).or_insert(0.0) += w * a.norm_sqr();
        }
    }
    out
}

/// Probability that `pred` holds.
pub fn probability_where<F>(branches: &[Branch], pred: F) -> f64
where
    F: Fn(&Branch, &[u64]) -> bool,
{
    distribution(branches, pred).get(&true).copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ratio;
    use crate::qsim::{RegisterLayout, Unitary};

    fn layout() -> Arc<RegisterLayout> {
        RegisterLayout::new(&[("X", 2), ("Y", 2)]).unwrap().shared()
    }

    #[test]
    fn lazy_slot_matches_table_enumeration() {
        let l = layout();
        let dom = Arc::new(Domain::flat(2).unwrap());
        let steps = vec![
            Step::unitary(&l, &["X"], Unitary::hadamard()).unwrap(),
            Step::Query(Query::standard(0, 0, 0, 1, 2, 2)),
            Step::unitary(&l, &["X"], Unitary::hadamard()).unwrap(),
        ];
        let dist = ValueDist::bernoulli(&ratio(1, 3)).unwrap();
        let start = Branch::new(StateVector::zero(l.clone()), vec![Slot::lazy(dom.clone(), dist).unwrap()]);
        let lazy = run(&steps, vec![start], &Transparent).unwrap();
        let by_lazy = distribution(&lazy, |_, d| d.to_vec());

        let mut by_table: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for t in 0..4u64 {
            let table = vec![t & 1, t >> 1];
            let w = (if table[0] == 1 { 1.0 / 3.0 } else { 2.0 / 3.0 }) * (if table[1] == 1 { 1.0 / 3.0 } else { 2.0 / 3.0 });
            let o = ClassicalOracle::from_table(dom.clone(), 2, table).unwrap();
            let out = run(&steps, vec![Branch::new(StateVector::zero(l.clone()), vec![Slot::fixed(o)])], &Transparent).unwrap();
            for (k, p) in distribution(&out, |_, d| d.to_vec()) {
                *by_table.entry(k).or_insert(0.0) += w * p;
            }
        }
        assert_eq!(by_lazy.len(), by_table.len());
        for (k, p) in by_lazy {
            assert!((p - by_table[&k]).abs() < 1e-12);
        }
        assert!((total_probability(&lazy) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn untouched_lazy_points_do_not_branch() {
        let l = layout();
        let dom = Arc::new(Domain::flat(2).unwrap());
        let steps = vec![Step::Query(Query::standard(0, 0, 0, 1, 2, 2))];
        let start = Branch::new(StateVector::zero(l), vec![Slot::lazy(dom, ValueDist::uniform(2)).unwrap()]);
        let out = run(&steps, vec![start], &Transparent).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|b| b.slots[0].assigned.len() == 1));
    }

    #[test]
    fn measurement_records_outcomes() {
        let l = layout();
        let steps = vec![Step::unitary(&l, &["X"], Unitary::hadamard()).unwrap(), Step::measure(&l, "X").unwrap()];
        let out = run(&steps, vec![Branch::new(StateVector::zero(l), vec![])], &Transparent).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].outcome(0), Some(1));
        assert!((out[0].probability() - 0.5).abs() < 1e-12);
    }
}
