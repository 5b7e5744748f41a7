//! Public-coin protocols: the decider simply runs `S` against the verifier
//! that answers with a random oracle of the transcript so far, and accepts
//! iff the simulated interaction is accepting.

use super::report::{Check, Relation, Report, StatementValue};
use super::{budget, decision, soundness, strict_calls, ExperimentConfig};
use crate::adversary::interact::run_simulator;
use crate::adversary::verifier::H_LABEL;
use crate::adversary::{AuxMode, SimEnv, Transparent, VerifierMachine};
use crate::Result;

const ANCHOR_BILLING: &str = "each invocation of V* makes 2(k−1) queries to H";
const ANCHOR_YES: &str = "the simulated view is accepting with probability at least 1/2";
const ANCHOR_NO: &str = "a Q-query prover can make V accept with probability at most";

/// Run the public-coin decider on every configured statement.
///
/// On no-instances with two prover messages the acceptance is compared to
/// `1 − (1 − s)^Q`, the chance that one of `Q` classical hash queries lands
/// on a first message and challenge the prover can answer, `s` being the
/// soundness error.
pub fn decide_public_coin(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.protocol_ref()?;
    p.check_public_coin()?;
    let sim = cfg.sim()?;
    let k = p.rounds();
    let (yes, no) = cfg.statements(&p)?;
    let mut calls = 0;
    if let Some(s) = yes.first().or(no.first()) {
        let m = VerifierMachine::public_coin(p.clone(), s.x)?;
        calls = strict_calls(&m, sim.as_ref(), &SimEnv::new(p.clone(), s.x, s.witness))?;
    }
    let q = budget(cfg, calls)?;
    let per_call = 2 * (k - 1);
    let mut report = Report::new(cfg.echo("public-coin", &p, q, vec![("hash_queries", (per_call * q).into())])?);
    let mut values = (Vec::new(), Vec::new());
    for st in yes.iter().chain(&no) {
        let env = SimEnv::new(p.clone(), st.x, st.witness);
        let m = VerifierMachine::public_coin(p.clone(), st.x)?;
        let run = run_simulator(&m, sim.as_ref(), &env, AuxMode::Coherent, None, &Transparent, cfg.mode)?;
        let billed = run.branches.iter().map(|b| b.count(H_LABEL)).max().unwrap_or(0);
        let exact = run.branches.iter().all(|b| b.count(H_LABEL) == per_call * b.calls);
        let mut bill = Check::new("query billing", ANCHOR_BILLING, Some(st.x), billed as f64, Relation::Le, (per_call * q) as f64, 0.0);
        if !exact {
            bill.pass = false;
            bill.status = super::Status::Fail;
        }
        report.push(bill);
        let acc = run.accept()?;
        let v = StatementValue { x: st.x, accept: acc };
        if st.is_yes() {
            report.push(Check::new("yes acceptance", ANCHOR_YES, Some(st.x), acc, Relation::Ge, 0.5, cfg.slack));
            values.0.push(v);
        } else {
            if k == 2 {
                let s = soundness(&p, st.x, cfg.mode)?;
                let bound = 1.0 - (1.0 - s).powi((per_call * q) as i32);
                report.push(Check::new("classical forgery bound", ANCHOR_NO, Some(st.x), acc, Relation::Le, bound, cfg.slack));
            }
            values.1.push(v);
        }
    }
    report.decision = Some(decision(values.0, values.1));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Parallelism;

    #[test]
    fn honest_wrapper_separates_toy_qr() {
        let cfg = ExperimentConfig { reps: 1, ..Default::default() };
        let report = decide_public_coin(&cfg).unwrap();
        assert!(report.ok(), "{:#?}", report.failures().collect::<Vec<_>>());
        let d = report.decision.unwrap();
        assert_eq!(d.min_yes(), Some(1.0));
        // One repetition: the honest code answers one of two challenges.
        assert!((d.max_no().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn toy_table_report_passes() {
        let cfg = ExperimentConfig { protocol: "toy-table".into(), ..Default::default() };
        let report = decide_public_coin(&cfg).unwrap();
        assert!(report.ok(), "{:#?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn sequential_matches() {
        let cfg = ExperimentConfig { reps: 1, statements: Some(vec![1, 2]), ..Default::default() };
        let a = decide_public_coin(&cfg).unwrap().to_json().unwrap();
        let b = decide_public_coin(&ExperimentConfig { mode: Parallelism::Sequential, ..cfg }).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}
