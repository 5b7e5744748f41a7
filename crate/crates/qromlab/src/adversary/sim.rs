use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::program::Step;
use super::verifier::honest_transcripts;
use crate::oracle::to_f64;
use crate::protocol::{honest_execution, ProtocolRef};
use crate::qsim::{RegisterLayout, Unitary};
use crate::{Error, Result};

/// One instruction of a black-box simulator.
#[derive(Debug, Clone)]
pub enum SimStep {
    /// A step on the simulator's own registers and the message register `M`.
    Local(Step),
    /// `U*`.
    Call,
    /// `U*†`.
    CallInverse,
}

/// A strict-budget step list with its probability.
///
/// A strict simulator has a single variant of weight one; an expected-time
/// simulator is a distribution over variants.
#[derive(Debug, Clone)]
pub struct Variant {
    pub weight: BigRational,
    pub steps: Vec<SimStep>,
}

impl Variant {
    pub fn strict(steps: Vec<SimStep>) -> Vec<Self> {
        vec![Self { weight: BigRational::one(), steps }]
    }

    pub fn calls(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, SimStep::Call | SimStep::CallInverse)).count()
    }
}

/// What a simulator is told about the instance.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub protocol: ProtocolRef,
    pub x: u64,
    /// Hardwired witness, when the simulator is allowed one.
    pub witness: Option<u64>,
}

impl SimEnv {
    pub fn new(protocol: ProtocolRef, x: u64, witness: Option<u64>) -> Self {
        Self { protocol, x, witness }
    }

    /// The witness, or the protocol's placeholder on no-instances.
    pub fn witness_or_placeholder(&self) -> u64 {
        self.witness.unwrap_or_else(|| self.protocol.placeholder_witness(self.x))
    }
}

pub trait Simulator: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Private registers besides the shared message register `M`.
    fn registers(&self, _env: &SimEnv) -> Vec<(String, u64)> {
        Vec::new()
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>>;

    /// Transcripts whose prefixes a predicate register must cover.
    fn touched_transcripts(&self, env: &SimEnv) -> Vec<Vec<u64>> {
        honest_transcripts(env.protocol.as_ref(), env.x, env.witness_or_placeholder())
    }

    /// `false` for deliberately out-of-model simulators that act on verifier
    /// registers directly.
    fn black_box(&self) -> bool {
        true
    }

    /// Exact expected number of invocations.
    fn expected_calls(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<BigRational> {
        Ok(self
            .variants(env, layout)?
            .iter()
            .map(|v| &v.weight * BigRational::from_integer(BigInt::from(v.calls())))
            .sum())
    }
}

fn reply_names(k: usize) -> Vec<String> {
    (1..k).map(|i| format!("C{i}")).collect()
}

/// Honest prover steps for rounds `1..=k`, with an optional hook after
/// each call.
fn honest_rounds(env: &SimEnv, layout: &RegisterLayout, mut after_call: impl FnMut(usize, &mut Vec<SimStep>) -> Result<()>) -> Result<Vec<SimStep>> {
    let p = env.protocol.clone();
    let k = p.rounds();
    let (x, w) = (env.x, env.witness_or_placeholder());
    let names = reply_names(k);
    let c_pos: Vec<usize> = names.iter().map(|n| layout.position(n)).collect::<Result<_>>()?;
    let m = layout.position("M")?;
    let n = layout.dim(m);
    let mut steps = Vec::new();
    for i in 1..=k {
        if i > 1 {
            let c = c_pos[i - 2];
            steps.push(SimStep::Local(Step::add_from(layout, "M", &names[i - 2])?));
            steps.push(SimStep::Local(Step::map(
                move |d| {
                    d[m] = (d[m] + n - d[c] % n) % n;
                    Ok(())
                },
                move |d| {
                    d[m] = (d[m] + d[c]) % n;
                    Ok(())
                },
            )));
        }
        let received = c_pos[..i - 1].to_vec();
        let (pf, pi) = (p.clone(), p.clone());
        let ri = received.clone();
        steps.push(SimStep::Local(Step::map(
            move |d| {
                let got: Vec<u64> = received.iter().map(|&q| d[q]).collect();
                d[m] = (d[m] + pf.prover_message(x, w, &got)) % n;
                Ok(())
            },
            move |d| {
                let got: Vec<u64> = ri.iter().map(|&q| d[q]).collect();
                d[m] = (d[m] + n - pi.prover_message(x, w, &got) % n) % n;
                Ok(())
            },
        )));
        steps.push(SimStep::Call);
        after_call(i, &mut steps)?;
    }
    Ok(steps)
}

/// Runs the honest prover's code with the witness hardwired; on a
/// no-instance it uses the protocol's placeholder witness.
#[derive(Debug, Clone, Default)]
pub struct HonestWrapper;

impl Simulator for HonestWrapper {
    fn name(&self) -> String {
        "honest-wrapper".into()
    }

    fn registers(&self, env: &SimEnv) -> Vec<(String, u64)> {
        reply_names(env.protocol.rounds()).into_iter().map(|n| (n, env.protocol.alphabet())).collect()
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        Ok(Variant::strict(honest_rounds(env, layout, |_, _| Ok(()))?))
    }
}

/// Sends a fixed transcript without looking at the replies.
#[derive(Debug, Clone, Default)]
pub struct GiveUp {
    pub transcript: Option<Vec<u64>>,
}

impl GiveUp {
    /// The honest transcript under `r = 0`, unless one was given.
    pub fn transcript(&self, env: &SimEnv) -> Vec<u64> {
        self.transcript
            .clone()
            .unwrap_or_else(|| honest_execution(env.protocol.as_ref(), env.x, env.witness_or_placeholder(), 0).prover)
    }
}

impl Simulator for GiveUp {
    fn name(&self) -> String {
        "give-up".into()
    }

    fn registers(&self, env: &SimEnv) -> Vec<(String, u64)> {
        (1..env.protocol.rounds()).map(|i| (format!("J{i}"), env.protocol.alphabet())).collect()
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        let t = self.transcript(env);
        if t.len() != env.protocol.rounds() {
            return Err(Error::InvalidParameter("give-up transcript has the wrong length".into()));
        }
        let mut steps = Vec::new();
        for (i, &m) in t.iter().enumerate() {
            if i > 0 {
                steps.push(SimStep::Local(Step::swap(layout, "M", &format!("J{i}"))?));
            }
            steps.push(SimStep::Local(Step::add_const(layout, "M", m)?));
            steps.push(SimStep::Call);
        }
        Ok(Variant::strict(steps))
    }

    fn touched_transcripts(&self, env: &SimEnv) -> Vec<Vec<u64>> {
        vec![self.transcript(env)]
    }
}

/// Honest prover that measures every reply and rewinds the first round
/// once before continuing: `k + 2` calls.
#[derive(Debug, Clone, Default)]
pub struct ClassicalRewinder;

impl Simulator for ClassicalRewinder {
    fn name(&self) -> String {
        "classical-rewinder".into()
    }

    fn registers(&self, env: &SimEnv) -> Vec<(String, u64)> {
        HonestWrapper.registers(env)
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        let m = layout.position("M")?;
        let steps = honest_rounds(env, layout, |i, steps| {
            steps.push(SimStep::Local(Step::Measure(m)));
            if i == 1 {
                steps.push(SimStep::CallInverse);
                steps.push(SimStep::Call);
                steps.push(SimStep::Local(Step::Measure(m)));
            }
            Ok(())
        })?;
        Ok(Variant::strict(steps))
    }
}

/// Two-call Grover-flavored simulator for one-message protocols: sends
/// the uniform superposition, applies the Fourier transform to whatever
/// comes back, and calls again.
#[derive(Debug, Clone, Default)]
pub struct GroverFlavored;

impl Simulator for GroverFlavored {
    fn name(&self) -> String {
        "grover".into()
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        if env.protocol.rounds() != 1 {
            return Err(Error::InvalidParameter("the Grover-flavored simulator needs k = 1".into()));
        }
        let n = env.protocol.alphabet() as usize;
        Ok(Variant::strict(vec![
            SimStep::Local(Step::unitary(layout, &["M"], Unitary::dft(n))?),
            SimStep::Call,
            SimStep::Local(Step::unitary(layout, &["M"], Unitary::dft(n))?),
            SimStep::Call,
        ]))
    }

    fn touched_transcripts(&self, env: &SimEnv) -> Vec<Vec<u64>> {
        (0..env.protocol.alphabet()).map(|m| vec![m]).collect()
    }
}

/// Out-of-model negative control: the honest wrapper followed by a direct
/// measurement of the verifier's `Cont` register.
#[derive(Debug, Clone, Default)]
pub struct ContMeasuring;

impl Simulator for ContMeasuring {
    fn name(&self) -> String {
        "cont-measuring".into()
    }

    fn registers(&self, env: &SimEnv) -> Vec<(String, u64)> {
        HonestWrapper.registers(env)
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        let mut steps = honest_rounds(env, layout, |_, _| Ok(()))?;
        steps.push(SimStep::Local(Step::measure(layout, "Cont")?));
        Ok(Variant::strict(steps))
    }

    fn black_box(&self) -> bool {
        false
    }
}

/// `n` pairs `U*` then `U*†` on the honest first message, which leave the
/// joint state unchanged.
fn dummy_pairs(env: &SimEnv, layout: &RegisterLayout, n: usize) -> Result<Vec<SimStep>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let m1 = env.protocol.prover_message(env.x, env.witness_or_placeholder(), &[]);
    let dim = layout.dim_of("M")?;
    let mut steps = vec![SimStep::Local(Step::add_const(layout, "M", m1 % dim)?)];
    for _ in 0..n {
        steps.push(SimStep::Call);
        steps.push(SimStep::CallInverse);
    }
    steps.push(SimStep::Local(Step::add_const(layout, "M", (dim - m1 % dim) % dim)?));
    Ok(steps)
}

/// Expected-time simulator: before the honest run, `n` dummy pairs
/// `U*` then `U*†`, with `Pr[n] = 2^{-(n+1)}` for `n < cap` and the
/// remaining mass on `n = cap`.
#[derive(Debug, Clone)]
pub struct Geometric {
    pub cap: usize,
}

impl Simulator for Geometric {
    fn name(&self) -> String {
        format!("geometric(cap={})", self.cap)
    }

    fn registers(&self, env: &SimEnv) -> Vec<(String, u64)> {
        HonestWrapper.registers(env)
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        let honest = honest_rounds(env, layout, |_, _| Ok(()))?;
        let mut out = Vec::with_capacity(self.cap + 1);
        let mut left = BigRational::one();
        for n in 0..=self.cap {
            let w = if n < self.cap { BigRational::new(BigInt::one(), BigInt::from(2u64) << n) } else { left.clone() };
            left -= &w;
            let mut steps = dummy_pairs(env, layout, n)?;
            steps.extend(honest.iter().cloned());
            out.push(Variant { weight: w, steps });
        }
        debug_assert!(left.is_zero());
        Ok(out)
    }
}

/// An explicit mixture of strict step lists, for building expected-time
/// simulators by hand.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub label: String,
    pub parts: Vec<(BigRational, usize)>,
}

impl Mixture {
    /// Honest run padded with `pad` dummy pairs, with the given weights.
    pub fn padded(label: &str, parts: Vec<(BigRational, usize)>) -> Result<Self> {
        let total: BigRational = parts.iter().map(|(w, _)| w.clone()).sum();
        if !total.is_one() {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {}", to_f64(&total))));
        }
        Ok(Self { label: label.into(), parts })
    }
}

impl Simulator for Mixture {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn registers(&self, env: &SimEnv) -> Vec<(String, u64)> {
        HonestWrapper.registers(env)
    }

    fn variants(&self, env: &SimEnv, layout: &RegisterLayout) -> Result<Vec<Variant>> {
        let honest = honest_rounds(env, layout, |_, _| Ok(()))?;
        self.parts
            .iter()
            .map(|(w, pad)| {
                let mut steps = dummy_pairs(env, layout, *pad)?;
                steps.extend(honest.iter().cloned());
                Ok(Variant { weight: w.clone(), steps })
            })
            .collect()
    }
}

/// Simulators selectable by name.
pub fn simulator_by_name(name: &str) -> Result<Box<dyn Simulator>> {
    Ok(match name {
        "honest-wrapper" => Box::new(HonestWrapper),
        "give-up" => Box::new(GiveUp::default()),
        "classical-rewinder" => Box::new(ClassicalRewinder),
        "grover" => Box::new(GroverFlavored),
        "cont-measuring" => Box::new(ContMeasuring),
        "geometric" => Box::new(Geometric { cap: 4 }),
        other => return Err(Error::InvalidParameter(format!("unknown simulator `{other}`"))),
    })
}

pub const SIMULATOR_NAMES: [&str; 6] = ["honest-wrapper", "give-up", "classical-rewinder", "grover", "cont-measuring", "geometric"];
