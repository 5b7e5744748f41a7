use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::adversary::interact::{joint_layout, link, Linked};
use crate::adversary::{SimEnv, Simulator, VerifierMachine};
use crate::oracle::to_f64;
use crate::{Error, Result};

/// Exact expected number of invocations of `sim` against `machine`.
pub fn expected_calls(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv) -> Result<BigRational> {
    let layout = joint_layout(machine, sim, env)?;
    sim.expected_calls(env, &layout)
}

/// Cut `sim` before its `(q+1)`-th invocation. Requires an expected
/// number of invocations of at most `q/2`.
pub fn truncate(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv, q: usize) -> Result<Linked> {
    let e = expected_calls(machine, sim, env)?;
    if BigRational::from_integer(BigInt::from(2)) * &e > BigRational::from_integer(BigInt::from(q)) {
        return Err(Error::InvalidParameter(format!(
            "{} makes {:.4} expected calls, more than q/2 = {}",
            sim.name(),
            to_f64(&e),
            q as f64 / 2.0
        )));
    }
    link(machine, sim, env, Some(q))
}

/// Exact `Pr[Q ≤ q]` over the simulator's variants.
pub fn halting_probability(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv, q: usize) -> Result<BigRational> {
    let linked = link(machine, sim, env, None)?;
    Ok(linked.variants.iter().filter(|v| v.calls <= q).fold(BigRational::zero(), |acc, v| acc + &v.weight))
}

/// Smallest `q` with expected calls `≤ q/2`.
pub fn markov_budget(machine: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv) -> Result<usize> {
    let twice = BigRational::from_integer(BigInt::from(2)) * expected_calls(machine, sim, env)?;
    let q = twice.ceil().to_integer();
    q.try_into().map_err(|_| Error::InvalidParameter("expected budget overflows".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::sim::{Geometric, HonestWrapper, Mixture};
    use crate::adversary::verifier::Support;
    use crate::oracle::ratio;
    use crate::protocol::{ProtocolRef, TableSoundness, ToyTable};
    use std::sync::Arc;

    fn setup() -> (VerifierMachine, SimEnv) {
        let p: ProtocolRef = Arc::new(ToyTable::three_round(TableSoundness::Half));
        let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
        (VerifierMachine::random_aborting(p.clone(), 0, ratio(1, 4), sup).unwrap(), SimEnv::new(p, 0, Some(1)))
    }

    #[test]
    fn strict_simulator_is_unchanged() {
        let (m, env) = setup();
        let linked = truncate(&m, &HonestWrapper, &env, 4).unwrap();
        assert!(linked.variants.iter().all(|v| !v.truncated));
        assert_eq!(halting_probability(&m, &HonestWrapper, &env, 2).unwrap(), ratio(1, 1));
    }

    #[test]
    fn over_budget_mixture_is_rejected() {
        // One pad w.p. 1/2 and many w.p. 1/2: expected calls exceed q/2.
        let (m, env) = setup();
        let q = 4;
        let mix = Mixture::padded("two-branch", vec![(ratio(1, 2), 0), (ratio(1, 2), 3 * q)]).unwrap();
        assert!(truncate(&m, &mix, &env, q).is_err());
    }

    #[test]
    fn geometric_halts_with_markov_probability() {
        let (m, env) = setup();
        for cap in 1..5 {
            let g = Geometric { cap };
            let q = markov_budget(&m, &g, &env).unwrap();
            let p = halting_probability(&m, &g, &env, q).unwrap();
            assert!(p >= ratio(1, 2), "cap {cap}: {p}");
            assert!(truncate(&m, &g, &env, q).is_ok());
        }
    }
}
