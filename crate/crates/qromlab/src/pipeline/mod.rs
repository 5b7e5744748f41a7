//! The simulator-to-decider reductions as runnable experiments, and the
//! lemma checks, all producing the same deterministic report format.

pub mod constant_round;
pub mod expected;
pub mod lemmas;
pub mod public_coin;
pub mod report;
pub mod three_round;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use constant_round::decide_constant_round;
pub use expected::expected_time_pipeline;
pub use lemmas::{verify_lemma, verify_lemma_seeded, LEMMA_NAMES};
pub use public_coin::decide_public_coin;
pub use report::{Check, Decision, Relation, Report, StatementValue, Status};
pub use three_round::decide_three_round;

use crate::adversary::interact::link;
use crate::adversary::{simulator_by_name, SimEnv, Simulator, VerifierMachine};
use crate::oracle::{parse_ratio, to_f64};
use crate::par::Parallelism;
use crate::protocol::{soundness_exact, ProtocolRef, Statement, TableSoundness, ToyQr, ToyTable};
use crate::{Error, Result};

/// Default slack standing in for negligible terms.
pub const DEFAULT_SLACK: f64 = 1e-9;

pub const PROTOCOL_NAMES: [&str; 2] = ["toy-qr", "toy-table"];
pub const THEOREM_NAMES: [&str; 4] = ["constant-round", "expected-time", "public-coin", "three-round"];

/// Inputs shared by every pipeline.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub protocol: String,
    /// Parallel repetitions of toy-QR; ignored by toy-table.
    pub reps: u32,
    pub eps: BigRational,
    /// Budget `q` in verifier calls; `None` uses the simulator's own count.
    pub q: Option<usize>,
    pub simulator: String,
    /// Statements to run; `None` runs all of them.
    pub statements: Option<Vec<u64>>,
    pub slack: f64,
    pub mode: Parallelism,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: "toy-qr".into(),
            reps: 3,
            eps: BigRational::new(BigInt::one(), BigInt::from(4)),
            q: None,
            simulator: "honest-wrapper".into(),
            statements: None,
            slack: DEFAULT_SLACK,
            mode: Parallelism::default(),
        }
    }
}

impl ExperimentConfig {
    /// Set `ε` from `B/A`, which must lie in `(0, 1]`.
    pub fn with_eps(mut self, eps: &str) -> Result<Self> {
        let e = parse_ratio(eps)?;
        if e <= BigRational::zero() || e > BigRational::one() {
            return Err(Error::InvalidParameter(format!("ε must lie in (0, 1], got {e}")));
        }
        self.eps = e;
        Ok(self)
    }

    pub fn protocol_ref(&self) -> Result<ProtocolRef> {
        protocol_by_name(&self.protocol, self.reps)
    }

    pub fn sim(&self) -> Result<Box<dyn Simulator>> {
        simulator_by_name(&self.simulator)
    }

    /// Yes- and no-instances to run, in protocol order.
    pub fn statements(&self, p: &ProtocolRef) -> Result<(Vec<Statement>, Vec<Statement>)> {
        let all = p.statements();
        let chosen: Vec<Statement> = match &self.statements {
            None => all,
            Some(xs) => xs
                .iter()
                .map(|x| {
                    all.iter()
                        .find(|s| s.x == *x)
                        .cloned()
                        .ok_or_else(|| Error::InvalidParameter(format!("{x} is not a statement of {}", p.name())))
                })
                .collect::<Result<_>>()?,
        };
        Ok(chosen.into_iter().partition(Statement::is_yes))
    }

    /// The configuration as echoed in reports.
    pub fn echo(&self, pipeline: &str, p: &ProtocolRef, q: usize, extra: Vec<(&str, serde_json::Value)>) -> Result<serde_json::Value> {
        let (yes, no) = self.statements(p)?;
        let mut map = serde_json::Map::new();
        map.insert("pipeline".into(), pipeline.into());
        map.insert("protocol".into(), p.name().into());
        map.insert("k".into(), p.rounds().into());
        map.insert("q".into(), q.into());
        map.insert("eps".into(), self.eps.to_string().into());
        map.insert("simulator".into(), self.simulator.clone().into());
        map.insert("yes".into(), yes.iter().map(|s| s.x).collect::<Vec<_>>().into());
        map.insert("no".into(), no.iter().map(|s| s.x).collect::<Vec<_>>().into());
        map.insert("slack".into(), self.slack.into());
        for (key, v) in extra {
            map.insert(key.into(), v);
        }
        Ok(serde_json::Value::Object(map))
    }
}

pub fn protocol_by_name(name: &str, reps: u32) -> Result<ProtocolRef> {
    Ok(match name {
        "toy-qr" => Arc::new(ToyQr::new(reps)?),
        "toy-table" => Arc::new(ToyTable::three_round(TableSoundness::Half)),
        other => return Err(Error::InvalidParameter(format!("unknown protocol `{other}` (expected one of {PROTOCOL_NAMES:?})"))),
    })
}

/// Run the pipeline called `name`.
pub fn run_theorem(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    match name {
        "constant-round" => decide_constant_round(cfg),
        "expected-time" => expected_time_pipeline(cfg),
        "public-coin" => decide_public_coin(cfg),
        "three-round" => decide_three_round(cfg),
        other => Err(Error::InvalidParameter(format!("unknown pipeline `{other}` (expected one of {THEOREM_NAMES:?})"))),
    }
}

/// `ε*_q = 1/(256 k² q² (4kq+1)^{2k})`.
pub fn eps_star(k: usize, q: usize) -> BigRational {
    let (k, q) = (k as u64, q as u64);
    let d = BigInt::from(256 * k * k * q * q) * BigInt::from(4 * k * q + 1).pow(2 * k as u32);
    BigRational::new(BigInt::one(), d)
}

/// Yes-instance floor at `ε ≤ ε*_q`: `1/(8(4kq+1)^{2k})`.
pub fn claim_floor(k: usize, q: usize) -> BigRational {
    let d = BigInt::from(8) * BigInt::from(4 * k as u64 * q as u64 + 1).pow(2 * k as u32);
    BigRational::new(BigInt::one(), d)
}

/// Number of verifier calls of a strict simulator.
pub(crate) fn strict_calls(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv) -> Result<usize> {
    let linked = link(machine, sim, env, None)?;
    match linked.variants.as_slice() {
        [v] => Ok(v.calls),
        _ => Err(Error::InvalidParameter(format!("{} is not a strict simulator", sim.name()))),
    }
}

/// The budget actually used: the configured one, which must cover the
/// simulator's own count.
pub(crate) fn budget(cfg: &ExperimentConfig, calls: usize) -> Result<usize> {
    match cfg.q {
        Some(q) if q < calls => Err(Error::BudgetExceeded { used: calls, budget: q }),
        Some(q) => Ok(q),
        None => Ok(calls),
    }
}

/// `soundness_exact`, memoized per protocol and statement for the process.
pub(crate) fn soundness(p: &ProtocolRef, x: u64, mode: Parallelism) -> Result<f64> {
    static CACHE: OnceLock<Mutex<BTreeMap<(String, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (p.name(), x);
    if let Some(v) = cache.lock().expect("soundness cache").get(&key) {
        return Ok(*v);
    }
    let v = to_f64(&soundness_exact(p.as_ref(), x, mode)?);
    cache.lock().expect("soundness cache").insert(key, v);
    Ok(v)
}

/// `ε^k` in doubles, from the exact value.
pub(crate) fn eps_pow(eps: &BigRational, k: usize) -> f64 {
    to_f64(&(0..k).fold(BigRational::one(), |acc, _| acc * eps))
}

fn decision(yes: Vec<StatementValue>, no: Vec<StatementValue>) -> Decision {
    let min_yes = yes.iter().map(|v| v.accept).fold(f64::INFINITY, f64::min);
    let max_no = no.iter().map(|v| v.accept).fold(f64::NEG_INFINITY, f64::max);
    let gap = (!yes.is_empty() && !no.is_empty()).then_some(min_yes - max_no);
    Decision { yes, no, gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ratio;

    #[test]
    fn eps_star_at_two_rounds_two_calls() {
        // 256 · 4 · 4 · 17^4
        assert_eq!(eps_star(2, 2), ratio(1, 256 * 16 * 83521));
        assert_eq!(claim_floor(2, 2), ratio(1, 8 * 83521));
    }

    #[test]
    fn eps_star_makes_the_hrs_term_half_the_floor() {
        // 32 k² q² ε*_q = 1/(8(4kq+1)^{2k}).
        for (k, q) in [(1, 1), (2, 2), (3, 1)] {
            let hrs = BigRational::from_integer(BigInt::from(32 * k * k * q * q)) * eps_star(k as usize, q as usize);
            assert_eq!(hrs, claim_floor(k as usize, q as usize));
        }
    }

    #[test]
    fn statements_partition() {
        let cfg = ExperimentConfig::default();
        let p = cfg.protocol_ref().unwrap();
        let (yes, no) = cfg.statements(&p).unwrap();
        assert_eq!(yes.iter().map(|s| s.x).collect::<Vec<_>>(), vec![1, 4, 16]);
        assert_eq!(no.len(), 9);
        let pick = ExperimentConfig { statements: Some(vec![4, 2]), ..cfg };
        let (yes, no) = pick.statements(&p).unwrap();
        assert_eq!((yes.len(), no.len()), (1, 1));
        assert!(ExperimentConfig { statements: Some(vec![3]), ..pick }.statements(&p).is_err());
    }
}
