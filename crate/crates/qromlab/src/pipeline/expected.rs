//! Expected polynomial-time simulators: truncate at the Markov budget and
//! check that the accepted `Cont` register still looks like the honest one.

use super::report::{Check, Relation, Report, StatementValue};
use super::{decision, eps_pow, ExperimentConfig};
use crate::adversary::interact::{run_interaction, run_simulator};
use crate::adversary::{AuxMode, SimEnv, Support, Transparent, VerifierMachine};
use crate::oracle::to_f64;
use crate::par::Parallelism;
use crate::qsim::{swap_test_probability, trace_distance, DensityOnRegister, C64};
use crate::transforms::{expected_calls, markov_budget, truncate};
use crate::{Error, Result};

/// `|φ_ε⟩ ∝ |0⟩ + ε^{k/2}|1⟩` on `Cont`: what an accepting honest run leaves.
pub fn phi_eps(eps: f64, k: usize) -> Result<DensityOnRegister> {
    let ek = eps.powi(k as i32);
    let amps = [C64::new((1.0 / (1.0 + ek)).sqrt(), 0.0), C64::new((ek / (1.0 + ek)).sqrt(), 0.0)];
    DensityOnRegister::from_pure("Cont", &amps)
}

const ANCHOR_HYPOTHESIS: &str = "S simulates the view of V* with Pr[B = 1] ≥ 1/2";
const ANCHOR_MARKOV: &str = "Pr[Q ≤ q ∧ B = 1] ≥ 1/4";
const ANCHOR_CONT: &str = "conditioned on B = 1, Cont is in the state |φ_ε⟩";
const ANCHOR_TRUNC: &str = "the truncated simulator is accepted by the random-aborting verifier with probability at least ε^k/4";
const ANCHOR_SWAP: &str = "D runs the SWAP test between Cont and a fresh copy of |φ_ε⟩";

/// Run the expected-time chain on every yes-instance.
pub fn expected_time_pipeline(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.protocol_ref()?;
    let sim = cfg.sim()?;
    let k = p.rounds();
    let (yes, _) = cfg.statements(&p)?;
    let eps = to_f64(&cfg.eps);
    let ek = eps_pow(&cfg.eps, k);
    let phi = phi_eps(eps, k)?;
    let slack = cfg.slack;
    let mut q = cfg.q.unwrap_or(0);
    let mut expected = 0.0;
    let mut rows = Vec::new();
    let mut vals = Vec::new();
    for st in &yes {
        let w = st.witness.expect("yes-instances carry a witness");
        let env = SimEnv::new(p.clone(), st.x, Some(w));
        let support = Support::honest(p.as_ref(), st.x, w)?;
        let sup = VerifierMachine::superposition(p.clone(), st.x, cfg.eps.clone(), support.clone())?;
        let qx = match cfg.q {
            Some(q) => q,
            None => markov_budget(&sup, sim.as_ref(), &env)?,
        };
        q = q.max(qx);
        expected = f64::max(expected, to_f64(&expected_calls(&sup, sim.as_ref(), &env)?));
        let run = run_simulator(&sup, sim.as_ref(), &env, AuxMode::Coherent, None, &Transparent, cfg.mode)?;
        let mut hyp = Check::new("hypothesis", ANCHOR_HYPOTHESIS, Some(st.x), run.accept()?, Relation::Ge, 0.5, slack);
        let ok = hyp.pass;
        hyp = hyp.given(ok);
        let within = run.accept_within(qx)?;
        let cont = run.cont_given_accept(Some(qx))?;
        let td = trace_distance(&cont, &phi)?;
        let d_sim = 1.0 - swap_test_probability(&cont, &phi)?;
        let real = run_interaction(&sup, &env, AuxMode::Coherent)?;
        let d_real = 1.0 - swap_test_probability(&real.cont_given_accept(None)?, &phi)?;
        let ra = VerifierMachine::random_aborting(p.clone(), st.x, cfg.eps.clone(), support)?;
        // A simulator that touches `Cont` has nothing to act on here.
        let trunc = match truncate(&ra, sim.as_ref(), &env, qx) {
            Err(Error::UnknownRegister(_)) => None,
            other => {
                other?;
                Some(run_simulator(&ra, sim.as_ref(), &env, AuxMode::Coherent, Some(qx), &Transparent, Parallelism::Sequential)?)
            }
        };
        rows.push(hyp);
        rows.push(Check::new("markov truncation", ANCHOR_MARKOV, Some(st.x), within, Relation::Ge, 0.25, slack).given(ok));
        rows.push(Check::new("accepted cont state", ANCHOR_CONT, Some(st.x), td, Relation::Le, 0.0, slack).given(ok));
        if let Some(t) = trunc {
            rows.push(Check::new("truncated random-aborting", ANCHOR_TRUNC, Some(st.x), t.accept()?, Relation::Ge, ek / 4.0, slack).given(ok));
        }
        rows.push(Check::new("swap test on the real interaction", ANCHOR_SWAP, Some(st.x), d_real, Relation::Le, 0.0, slack));
        rows.push(Check::new("swap test on the simulation", ANCHOR_SWAP, Some(st.x), d_sim, Relation::Le, td, slack));
        vals.push(StatementValue { x: st.x, accept: within });
    }
    let mut report = Report::new(cfg.echo("expected-time", &p, q, vec![("expected_calls", expected.into())])?);
    for c in rows {
        report.push(c);
    }
    report.decision = Some(decision(vals, Vec::new()));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_is_normalized() {
        for e in [0.1, 0.25, 1.0] {
            assert!((phi_eps(e, 2).unwrap().trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn honest_wrapper_passes_on_one_repetition() {
        let cfg = ExperimentConfig { reps: 1, ..Default::default() };
        let report = expected_time_pipeline(&cfg).unwrap();
        assert!(report.ok(), "{:#?}", report.failures().collect::<Vec<_>>());
        // Two calls, one per prover message.
        assert_eq!(report.config["q"], 4);
    }

    #[test]
    fn geometric_simulator_is_truncated_at_its_markov_budget() {
        let cfg = ExperimentConfig { reps: 1, simulator: "geometric".into(), statements: Some(vec![4]), ..Default::default() };
        let report = expected_time_pipeline(&cfg).unwrap();
        assert!(report.ok(), "{:#?}", report.failures().collect::<Vec<_>>());
        assert!(report.config["expected_calls"].as_f64().unwrap() > 1.0);
    }

    #[test]
    fn cont_measuring_is_caught() {
        let cfg = ExperimentConfig { reps: 1, simulator: "cont-measuring".into(), statements: Some(vec![4]), ..Default::default() };
        let report = expected_time_pipeline(&cfg).unwrap();
        let td = report.find("accepted cont state", Some(4)).unwrap();
        assert!((td.lhs - 4.0 / 17.0).abs() < 1e-9);
        assert!(!report.ok());
    }
}
