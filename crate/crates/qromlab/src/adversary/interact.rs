use std::sync::Arc;

use num_rational::BigRational;

use super::exec::{self, Branch, Interceptor};
use super::program::{invert, Step};
use super::sim::{HonestWrapper, SimEnv, SimStep, Simulator};
use super::verifier::{AuxMode, VerifierMachine};
use crate::oracle::to_f64;
use crate::par::{self, Parallelism};
use crate::qsim::{DensityOnRegister, RegisterLayout};
use crate::{Error, Result};

/// A simulator variant with every call expanded into verifier steps.
#[derive(Debug, Clone)]
pub struct LinkedVariant {
    pub weight: BigRational,
    pub steps: Vec<Step>,
    /// Calls the variant would make without a cap.
    pub calls: usize,
    /// Whether the cap cut this variant short.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Linked {
    pub layout: Arc<RegisterLayout>,
    pub variants: Vec<LinkedVariant>,
}

/// The joint layout: verifier registers first, then the simulator's.
pub fn joint_layout(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv) -> Result<Arc<RegisterLayout>> {
    let mut regs = machine.registers()?;
    for (name, dim) in sim.registers(env) {
        if regs.iter().any(|(n, _)| *n == name) {
            return Err(Error::Layout(format!("simulator register `{name}` clashes with the verifier")));
        }
        regs.push((name, dim));
    }
    Ok(RegisterLayout::new(&regs)?.shared())
}

fn check_black_box(step: &Step, layout: &RegisterLayout, verifier: &[usize]) -> Result<()> {
    let touched: Vec<usize> = match step {
        Step::Unitary { targets, control, .. } => targets.iter().copied().chain(control.map(|c| c.0)).collect(),
        Step::Measure(p) => vec![*p],
        _ => Vec::new(),
    };
    if let Some(p) = touched.into_iter().find(|p| verifier.contains(p)) {
        return Err(Error::InvalidParameter(format!("simulator acts on verifier register `{}`", layout.name(p))));
    }
    Ok(())
}

/// Expand every call of every variant, cutting each variant just before
/// its `(cap + 1)`-th call.
pub fn link(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv, cap: Option<usize>) -> Result<Linked> {
    let layout = joint_layout(machine, sim, env)?;
    let forward = machine.call_steps(&layout)?;
    let backward = invert(&forward)?;
    let m = layout.position("M")?;
    let verifier: Vec<usize> = machine
        .registers()?
        .iter()
        .map(|(n, _)| layout.position(n))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&p| p != m)
        .collect();
    let mut variants = Vec::new();
    for v in sim.variants(env, &layout)? {
        let calls = v.calls();
        let mut steps = Vec::new();
        let mut made = 0;
        let mut truncated = false;
        for s in v.steps {
            match s {
                SimStep::Local(step) => {
                    if sim.black_box() {
                        check_black_box(&step, &layout, &verifier)?;
                    }
                    steps.push(step);
                }
                SimStep::Call | SimStep::CallInverse => {
                    if cap.is_some_and(|c| made == c) {
                        truncated = true;
                        break;
                    }
                    made += 1;
                    let block = if matches!(s, SimStep::Call) { &forward } else { &backward };
                    steps.extend(block.iter().cloned());
                }
            }
        }
        variants.push(LinkedVariant { weight: v.weight, steps, calls, truncated });
    }
    Ok(Linked { layout, variants })
}

/// Exact outcome of running a simulator against a verifier.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub layout: Arc<RegisterLayout>,
    /// Final branches; weights include the variant weight.
    pub branches: Vec<Branch>,
    /// Index into `variants` for each branch.
    pub variant_of: Vec<usize>,
    pub variants: Vec<(BigRational, usize, bool)>,
}

impl SimRun {
    fn pos(&self, name: &str) -> Result<usize> {
        self.layout.position(name)
    }

    /// `Pr[pred]` over every branch and basis state; `pred` sees the
    /// variant's uncapped call count.
    pub fn probability<F>(&self, pred: F) -> f64
    where
        F: Fn(usize, &Branch, &[u64]) -> bool,
    {
        let mut total = 0.0;
        for (b, &v) in self.branches.iter().zip(&self.variant_of) {
            let w = to_f64(&b.weight);
            let mut digits = Vec::with_capacity(self.layout.len());
            for (idx, a) in b.state.entries() {
                self.layout.decode_into(idx, &mut digits);
                if pred(self.variants[v].1, b, &digits) {
                    total += w * a.norm_sqr();
                }
            }
        }
        total
    }

    /// `E[f]` over every branch and basis state, with branch weights.
    pub fn try_expectation<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(usize, &Branch, &[u64]) -> Result<f64>,
    {
        let mut total = 0.0;
        for (b, &v) in self.branches.iter().zip(&self.variant_of) {
            let w = to_f64(&b.weight);
            let mut digits = Vec::with_capacity(self.layout.len());
            for (idx, a) in b.state.entries() {
                self.layout.decode_into(idx, &mut digits);
                let y = f(self.variants[v].1, b, &digits)?;
                if y != 0.0 {
                    total += w * a.norm_sqr() * y;
                }
            }
        }
        Ok(total)
    }

    pub fn prob_register(&self, name: &str, value: u64) -> Result<f64> {
        let p = self.pos(name)?;
        Ok(self.probability(|_, _, d| d[p] == value))
    }

    /// `Pr[B = 1]`.
    pub fn accept(&self) -> Result<f64> {
        self.prob_register("B", 1)
    }

    /// `Pr[Q ≤ q ∧ B = 1]`, with `Q` the uncapped call count.
    pub fn accept_within(&self, q: usize) -> Result<f64> {
        let b = self.pos("B")?;
        Ok(self.probability(|calls, _, d| calls <= q && d[b] == 1))
    }

    /// `Pr[Q ≤ q]`.
    pub fn halts_within(&self, q: usize) -> f64 {
        self.variants.iter().filter(|v| v.1 <= q).map(|v| to_f64(&v.0)).sum()
    }

    /// Reduced state of `reg` conditioned on `cond`.
    pub fn conditional_state<F>(&self, reg: &str, cond: F) -> Result<DensityOnRegister>
    where
        F: Fn(usize, &Branch, &[u64]) -> bool,
    {
        let mut parts = Vec::new();
        for (b, &v) in self.branches.iter().zip(&self.variant_of) {
            let calls = self.variants[v].1;
            let kept = b.state.project_where(|d| cond(calls, b, d));
            let n = kept.norm_sqr();
            if n > 0.0 {
                parts.push((to_f64(&b.weight) * n, kept.partial_trace(&[reg])?));
            }
        }
        if parts.is_empty() {
            return Err(Error::ZeroProbabilityOutcome { register: reg.into(), outcome: 0 });
        }
        DensityOnRegister::mixture(&parts)
    }

    /// `Cont` conditioned on `B = 1` (and `Q ≤ q` when given).
    pub fn cont_given_accept(&self, q: Option<usize>) -> Result<DensityOnRegister> {
        let b = self.pos("B")?;
        self.conditional_state("Cont", |calls, _, d| d[b] == 1 && q.is_none_or(|q| calls <= q))
    }
}

/// Run `sim` against `machine` exhaustively.
pub fn run_simulator(
    machine: &VerifierMachine,
    sim: &dyn Simulator,
    env: &SimEnv,
    aux: AuxMode,
    cap: Option<usize>,
    icpt: &dyn Interceptor,
    mode: Parallelism,
) -> Result<SimRun> {
    let linked = link(machine, sim, env, cap)?;
    let layout = linked.layout.clone();
    let jobs: Vec<(usize, LinkedVariant)> = linked.variants.into_iter().enumerate().collect();
    let results = par::try_map(mode, jobs, |(i, v)| -> Result<(usize, LinkedVariant, Vec<Branch>)> {
        let start = machine
            .initial(layout.clone(), aux)?
            .into_iter()
            .map(|b| {
                let w = &b.weight * &v.weight;
                b.with_weight(w)
            })
            .collect();
        let out = exec::run(&v.steps, start, icpt)?;
        Ok((i, v, out))
    })?;
    let mut run = SimRun { layout, branches: Vec::new(), variant_of: Vec::new(), variants: Vec::new() };
    for (i, v, out) in results {
        run.variants.push((v.weight, v.calls, v.truncated));
        run.variant_of.extend(std::iter::repeat_n(i, out.len()));
        run.branches.extend(out);
    }
    Ok(run)
}

/// The real interaction between the honest prover and `machine`.
pub fn run_interaction(machine: &VerifierMachine, env: &SimEnv, aux: AuxMode) -> Result<SimRun> {
    if env.witness.is_none() {
        return Err(Error::InvalidParameter("the honest prover needs a witness".into()));
    }
    run_simulator(machine, &HonestWrapper, env, aux, None, &exec::Transparent, Parallelism::Sequential)
}
