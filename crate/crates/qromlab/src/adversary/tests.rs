use std::sync::Arc;

use approx::assert_abs_diff_eq;
use num_rational::BigRational;

use super::sim::{ClassicalRewinder, ContMeasuring, Geometric, GiveUp, GroverFlavored, HonestWrapper};
use super::verifier::{Support, F_LABEL, H_LABEL};
use super::*;
use crate::hashfam::TwoQWiseFamily;
use crate::oracle::{ratio, to_f64, ValueDist};
use crate::par::Parallelism;
use crate::protocol::{ProtocolRef, TableSoundness, ToyQr, ToyTable};
use crate::qsim::{trace_distance, DensityOnRegister, C64};

fn table() -> ProtocolRef {
    Arc::new(ToyTable::three_round(TableSoundness::Half))
}

fn qr() -> ProtocolRef {
    Arc::new(ToyQr::new(1).unwrap())
}

fn phi(eps: f64, k: i32) -> DensityOnRegister {
    let ek = eps.powi(k);
    let amps = [C64::new((1.0 / (1.0 + ek)).sqrt(), 0.0), C64::new((ek / (1.0 + ek)).sqrt(), 0.0)];
    DensityOnRegister::from_pure("Cont", &amps).unwrap()
}

fn sim_run(m: &VerifierMachine, sim: &dyn Simulator, env: &SimEnv, cap: Option<usize>) -> SimRun {
    run_simulator(m, sim, env, AuxMode::Coherent, cap, &Transparent, Parallelism::Sequential).unwrap()
}

#[test]
fn random_aborting_acceptance_is_eps_to_the_k() {
    let p = qr();
    let env = SimEnv::new(p.clone(), 4, Some(2));
    let sup = Support::honest(p.as_ref(), 4, 2).unwrap();
    for (eps, want) in [(ratio(1, 1), 1.0), (ratio(0, 1), 0.0), (ratio(1, 2), 0.25)] {
        let m = VerifierMachine::random_aborting(p.clone(), 4, eps, sup.clone()).unwrap();
        assert_abs_diff_eq!(run_interaction(&m, &env, AuxMode::Coherent).unwrap().accept().unwrap(), want, epsilon = 1e-12);
    }
}

#[test]
fn measuring_the_auxiliary_input_changes_nothing() {
    let p = table();
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
    let m = VerifierMachine::random_aborting(p, 0, ratio(1, 3), sup).unwrap();
    let sims: [&dyn Simulator; 3] = [&HonestWrapper, &ClassicalRewinder, &GiveUp::default()];
    for sim in sims {
        let a = run_simulator(&m, sim, &env, AuxMode::Coherent, None, &Transparent, Parallelism::Sequential).unwrap();
        let b = run_simulator(&m, sim, &env, AuxMode::Measured, None, &Transparent, Parallelism::Sequential).unwrap();
        assert_abs_diff_eq!(a.accept().unwrap(), b.accept().unwrap(), epsilon = 1e-12);
        let m_reg = a.layout.position("M").unwrap();
        for v in 0..2 {
            let pa = a.probability(|_, _, d| d[m_reg] == v);
            let pb = b.probability(|_, _, d| d[m_reg] == v);
            assert_abs_diff_eq!(pa, pb, epsilon = 1e-12);
        }
    }
}

#[test]
fn accepted_cont_state_is_phi() {
    let p = qr();
    let env = SimEnv::new(p.clone(), 4, Some(2));
    let sup = Support::honest(p.as_ref(), 4, 2).unwrap();
    for (n, d) in [(1, 4), (1, 2)] {
        let eps = ratio(n, d);
        let e = to_f64(&eps);
        let m = VerifierMachine::superposition(p.clone(), 4, eps, sup.clone()).unwrap();
        let run = run_interaction(&m, &env, AuxMode::Coherent).unwrap();
        let rho = run.cont_given_accept(None).unwrap();
        assert!(trace_distance(&rho, &phi(e, 2)).unwrap() < 1e-9);
        assert_abs_diff_eq!(run.accept().unwrap(), (1.0 + e.powi(2)) / 2.0, epsilon = 1e-12);
    }
}

#[test]
fn measuring_cont_is_far_from_phi() {
    let p = qr();
    let env = SimEnv::new(p.clone(), 4, Some(2));
    let sup = Support::honest(p.as_ref(), 4, 2).unwrap();
    let m = VerifierMachine::superposition(p, 4, ratio(1, 4), sup).unwrap();
    let run = sim_run(&m, &ContMeasuring, &env, None);
    let rho = run.cont_given_accept(None).unwrap();
    let td = trace_distance(&rho, &phi(0.25, 2)).unwrap();
    assert_abs_diff_eq!(td, 4.0 / 17.0, epsilon = 1e-9);
}

#[test]
fn efficient_verifier_matches_the_exact_one() {
    let p = table();
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let eps = ratio(1, 2);
    let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
    let exact = run_interaction(&VerifierMachine::superposition(p.clone(), 0, eps.clone(), sup).unwrap(), &env, AuxMode::Coherent).unwrap();
    let fam = TwoQWiseFamily::for_epsilon(2, 2, &eps, 4).unwrap();
    let eff = run_interaction(&VerifierMachine::superposition_efficient(p, 0, fam).unwrap(), &env, AuxMode::Coherent).unwrap();
    assert_abs_diff_eq!(exact.accept().unwrap(), eff.accept().unwrap(), epsilon = 1e-9);
    let td = trace_distance(&exact.cont_given_accept(None).unwrap(), &eff.cont_given_accept(None).unwrap()).unwrap();
    assert!(td < 1e-9);
}

#[test]
fn compiled_verifier_matches_registers_and_bills_2k() {
    let p = table();
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let eps = ratio(1, 3);
    let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
    let regs = VerifierMachine::random_aborting(p.clone(), 0, eps.clone(), sup).unwrap();
    let want = run_interaction(&regs, &env, AuxMode::Coherent).unwrap().accept().unwrap();
    let dom = Arc::new(p.transcript_domain().unwrap());
    let mut got = 0.0;
    for r in 0..p.randomness() {
        let h = Slot::lazy(dom.clone(), ValueDist::bernoulli(&eps).unwrap()).unwrap();
        let f = VerifierMachine::f_slot(&p, 0, r).unwrap();
        let m = VerifierMachine::random_aborting_compiled(p.clone(), 0, h, f).unwrap();
        let run = run_interaction(&m, &env, AuxMode::Coherent).unwrap();
        for b in &run.branches {
            assert_eq!(b.count(H_LABEL), 2 * 2 * 2);
            assert_eq!(b.count(F_LABEL), 2);
        }
        got += run.accept().unwrap() / p.randomness() as f64;
    }
    assert_abs_diff_eq!(got, want, epsilon = 1e-12);
}

#[test]
fn give_up_matches_closed_form() {
    // Fixed transcript (0, 0) accepts iff r = 0 and both prefixes are flagged.
    let p = table();
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
    let m = VerifierMachine::random_aborting(p, 0, ratio(1, 3), sup).unwrap();
    let run = sim_run(&m, &GiveUp::default(), &env, None);
    assert_abs_diff_eq!(run.accept().unwrap(), 0.5 / 9.0, epsilon = 1e-12);
}

#[test]
fn grover_matches_hand_simulation() {
    // Amplitudes over (M, B) for the branch H(1) = 1; with H(1) = 0 nothing is ever accepted.
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = |v: [f64; 4]| -> [f64; 4] {
        // index = m + 2b
        let mut out = [0.0; 4];
        for b in 0..2 {
            out[2 * b] = h * (v[2 * b] + v[2 * b + 1]);
            out[2 * b + 1] = h * (v[2 * b] - v[2 * b + 1]);
        }
        out
    };
    let call = |v: [f64; 4]| -> [f64; 4] { [v[0], v[3], v[2], v[1]] };
    let v = call(hadamard(call(hadamard([1.0, 0.0, 0.0, 0.0]))));
    let flagged = v[2] * v[2] + v[3] * v[3];
    let want = 0.5 * flagged;

    let p: ProtocolRef = Arc::new(ToyTable::one_round(TableSoundness::Half));
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let sup = Support::of_transcripts(p.as_ref(), &[vec![0], vec![1]]).unwrap();
    let m = VerifierMachine::random_aborting(p, 0, ratio(1, 2), sup).unwrap();
    let run = sim_run(&m, &GroverFlavored, &env, None);
    assert_abs_diff_eq!(run.accept().unwrap(), want, epsilon = 1e-12);
}

#[test]
fn dummy_pairs_are_invisible() {
    let p = table();
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
    let m = VerifierMachine::superposition(p, 0, ratio(1, 2), sup).unwrap();
    let honest = run_interaction(&m, &env, AuxMode::Coherent).unwrap();
    let geo = Geometric { cap: 3 };
    let run = sim_run(&m, &geo, &env, None);
    assert_abs_diff_eq!(run.accept().unwrap(), honest.accept().unwrap(), epsilon = 1e-12);
    let layout = link(&m, &geo, &env, None).unwrap().layout;
    // E[n] = 1 - 2^{-cap}, two calls per pair, plus k.
    let want = BigRational::from_integer(2.into()) + ratio(7, 8) * BigRational::from_integer(2.into());
    assert_eq!(geo.expected_calls(&env, &layout).unwrap(), want);
    // A cap of 2 keeps n = 0 only.
    let cut = sim_run(&m, &geo, &env, Some(2));
    assert_abs_diff_eq!(cut.halts_within(2), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(cut.accept_within(2).unwrap(), 0.5 * honest.accept().unwrap(), epsilon = 1e-12);
}

#[test]
fn public_coin_and_three_round_honest_runs() {
    let p = table();
    for (x, w, want) in [(0, Some(1), 1.0), (1, None, 0.5)] {
        let env = SimEnv::new(p.clone(), x, w);
        let pc = VerifierMachine::public_coin(p.clone(), x).unwrap();
        assert_abs_diff_eq!(sim_run(&pc, &HonestWrapper, &env, None).accept().unwrap(), want, epsilon = 1e-12);
        let tr = VerifierMachine::three_round(p.clone(), x).unwrap();
        assert_abs_diff_eq!(sim_run(&tr, &HonestWrapper, &env, None).accept().unwrap(), want, epsilon = 1e-12);
    }
}

#[derive(Debug)]
struct Peeker;

impl Simulator for Peeker {
    fn name(&self) -> String {
        "peeker".into()
    }

    fn variants(&self, _env: &SimEnv, layout: &crate::qsim::RegisterLayout) -> crate::Result<Vec<Variant>> {
        Ok(Variant::strict(vec![SimStep::Local(Step::measure(layout, "B")?), SimStep::Call]))
    }
}

#[test]
fn black_box_simulators_cannot_touch_verifier_registers() {
    let p = table();
    let env = SimEnv::new(p.clone(), 0, Some(1));
    let sup = Support::honest(p.as_ref(), 0, 1).unwrap();
    let m = VerifierMachine::superposition(p, 0, ratio(1, 2), sup).unwrap();
    assert!(link(&m, &Peeker, &env, None).is_err());
    assert!(link(&m, &ContMeasuring, &env, None).is_ok());
}
