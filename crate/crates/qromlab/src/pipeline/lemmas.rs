//! Exhaustive checks of the individual lemmas on small instances, each as a
//! report of inequalities.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expected::phi_eps;
use super::report::{Check, Relation, Report};
use crate::adversary::sim::{ContMeasuring, Geometric, HonestWrapper, Mixture};
use crate::adversary::zoo::{pair_zoo, prefix_zoo, single_zoo};
use crate::adversary::{run_interaction, run_simulator, AuxMode, OracleAlgorithm, SimEnv, Simulator, Support, Transparent, VerifierMachine};
use crate::hashfam::{pure_distance, sparse_superposition, BaseFamily, EfficientAdjuster, ExactAdjuster, TwoQWiseFamily};
use crate::oracle::{ratio, to_f64, ClassicalOracle, Domain, SparseOracleDist};
use crate::par::{self, Parallelism};
use crate::protocol::{ProtocolRef, TableSoundness, ToyQr, ToyTable};
use crate::qsim::{swap_test_circuit, swap_test_probability, trace_distance, DensityOnRegister, C64};
use crate::transforms::{
    bottom_probability, check_mar_general, check_mar_ordered, expected_calls, halting_probability, mar_ordered, markov_budget,
    o2h_corollary_c, small_subsets, truncate, MarCheck,
};
use crate::{Error, Result};

pub const LEMMA_NAMES: [&str; 11] =
    ["zhandry", "hrs", "swap", "o2h", "mar", "mar-ordered", "adjuster", "adjuster-eff", "final-state", "markov", "truncation"];

/// Exact comparisons computed in doubles.
const EXACT: f64 = 1e-10;
/// Same for fidelity distances, which take a square root of the rounding error.
const PURE: f64 = 1e-7;

/// Seed of the random state pairs in the SWAP check.
pub const DEFAULT_SEED: u64 = 2024;

/// Run the check called `name`.
pub fn verify_lemma(name: &str, mode: Parallelism) -> Result<Report> {
    verify_lemma_seeded(name, mode, DEFAULT_SEED)
}

/// [`verify_lemma`] with the random pairs drawn from `seed`.
pub fn verify_lemma_seeded(name: &str, mode: Parallelism, seed: u64) -> Result<Report> {
    let mut report = Report::new(serde_json::json!({ "lemma": name, "seed": seed }));
    match name {
        "zhandry" => zhandry(&mut report, mode)?,
        "hrs" => hrs(&mut report, mode)?,
        "swap" => swap(&mut report, seed)?,
        "o2h" => o2h(&mut report, mode)?,
        "mar" => mar(&mut report, mode)?,
        "mar-ordered" => mar_ordered_check(&mut report, mode)?,
        "adjuster" => adjuster(&mut report)?,
        "adjuster-eff" => adjuster_eff(&mut report)?,
        "final-state" => final_state(&mut report)?,
        "markov" => markov(&mut report)?,
        "truncation" => truncation(&mut report)?,
        other => return Err(Error::InvalidParameter(format!("unknown lemma `{other}` (expected one of {LEMMA_NAMES:?})"))),
    }
    Ok(report)
}

type Dist = BTreeMap<Vec<u64>, f64>;

fn total_variation(a: &Dist, b: &Dist) -> f64 {
    let mut keys: Vec<&Vec<u64>> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.iter().map(|k| (a.get(*k).unwrap_or(&0.0) - b.get(*k).unwrap_or(&0.0)).abs()).sum::<f64>() / 2.0
}

/// `Σ_i w_i · dist(A^{H_i})`.
fn averaged<I>(alg: &OracleAlgorithm, oracles: I) -> Result<Dist>
where
    I: IntoIterator<Item = (ClassicalOracle, f64)>,
{
    let mut out = Dist::new();
    for (h, w) in oracles {
        for (k, p) in alg.distribution(&h)? {
            *out.entry(k).or_insert(0.0) += w * p;
        }
    }
    Ok(out)
}

fn flat(points: u64) -> Result<Arc<Domain>> {
    Ok(Arc::new(Domain::flat(points)?))
}

const ANCHOR_ZHANDRY: &str = "the output distribution of a q-query algorithm is the same for a random function and a 2q-wise independent one";

fn zhandry(report: &mut Report, mode: Parallelism) -> Result<()> {
    let range = 2;
    for points in [4u64, 6] {
        let domain = flat(points)?;
        let all = BaseFamily::table(points, range)?;
        for q in 1..=2usize {
            let fam = BaseFamily::for_queries(points, range, q)?;
            let oracles = |f: &BaseFamily| -> Vec<(ClassicalOracle, f64)> {
                let n = f.key_count();
                (0..n)
                    .map(|key| {
                        let f = f.clone();
                        (ClassicalOracle::from_fn(domain.clone(), range, move |p| f.eval(key, p)), 1.0 / n as f64)
                    })
                    .collect()
            };
            let algs: Vec<OracleAlgorithm> = single_zoo(points, range, q)?.into_iter().filter(|a| a.queries == q).collect();
            let tvs = par::try_map(mode, algs, |alg| -> Result<(String, f64)> {
                let a = averaged(&alg, oracles(&all))?;
                let b = averaged(&alg, oracles(&fam))?;
                Ok((alg.name.clone(), total_variation(&a, &b)))
            })?;
            for (alg, tv) in tvs {
                report.push(Check::new(&format!("{alg}, {points} points, q={q}"), ANCHOR_ZHANDRY, None, tv, Relation::Le, 0.0, EXACT));
            }
        }
    }
    Ok(())
}

const ANCHOR_HRS: &str = "no q-query algorithm distinguishes H_ε from the all-zero function with advantage more than 8q^2 ε";

fn hrs(report: &mut Report, mode: Parallelism) -> Result<()> {
    let points = 4;
    let domain = flat(points)?;
    let zero = ClassicalOracle::zero(domain.clone(), 2)?;
    for (n, d) in [(1, 2), (1, 4), (1, 16), (1, 256)] {
        let eps = ratio(n, d);
        let e = to_f64(&eps);
        let dist = SparseOracleDist::new(eps.clone(), domain.clone())?;
        let sparse: Vec<(ClassicalOracle, f64)> = dist.enumerate_weighted()?.map(|(h, w)| (h, to_f64(&w))).collect();
        let algs = single_zoo(points, 2, 2)?;
        let rows = par::try_map(mode, algs, |alg| -> Result<(String, usize, f64)> {
            let a = averaged(&alg, sparse.iter().cloned())?;
            let b = alg.distribution(&zero)?;
            Ok((alg.name.clone(), alg.queries, total_variation(&a, &b)))
        })?;
        for (alg, q, adv) in rows {
            report.push(Check::new(&format!("{alg}, eps={eps}"), ANCHOR_HRS, None, adv, Relation::Le, 8.0 * (q * q) as f64 * e, 0.0));
            if alg == "classical(0)" {
                // Reading H(0) once distinguishes with advantage exactly ε.
                report.push(Check::new(&format!("{alg} advantage is eps, eps={eps}"), ANCHOR_HRS, None, (adv - e).abs(), Relation::Le, 0.0, EXACT));
            }
        }
    }
    Ok(())
}

const ANCHOR_SWAP: &str = "the SWAP test accepts with probability (1 + Tr(ρσ))/2";

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Result<DensityOnRegister> {
    let rank = rng.gen_range(1..=dim);
    let mut parts = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut amps: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        parts.push((rng.gen_range(0.1..1.0), DensityOnRegister::from_pure("A", &amps)?));
    }
    let total: f64 = parts.iter().map(|p| p.0).sum();
    for p in &mut parts {
        p.0 /= total;
    }
    DensityOnRegister::mixture(&parts)
}

fn swap(report: &mut Report, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..20 {
        let dim = rng.gen_range(2..=4);
        let rho = random_state(&mut rng, dim)?;
        let sigma = random_state(&mut rng, dim)?;
        let formula = swap_test_probability(&rho, &sigma)?;
        let circuit = swap_test_circuit(&rho, &sigma)?;
        report.push(Check::new(&format!("random pair {i} (dim {dim})"), ANCHOR_SWAP, None, (formula - circuit).abs(), Relation::Le, 0.0, EXACT));
    }
    let zero = DensityOnRegister::from_pure("A", &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])?;
    let one = DensityOnRegister::from_pure("A", &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)])?;
    let same = swap_test_circuit(&zero, &zero)?;
    report.push(Check::new("identical pure states", ANCHOR_SWAP, None, (same - 1.0).abs(), Relation::Le, 0.0, EXACT));
    let orth = swap_test_circuit(&zero, &one)?;
    report.push(Check::new("orthogonal states", ANCHOR_SWAP, None, (orth - 0.5).abs(), Relation::Le, 0.0, EXACT));
    Ok(())
}

const ANCHOR_O2H: &str = "√Pr[C ∈ S] ≥ Pr[A^{F_S} ∈ S] / (4√(q+1))";

fn o2h(report: &mut Report, mode: Parallelism) -> Result<()> {
    for alg in single_zoo(3, 2, 2)? {
        for s in small_subsets(3, 2) {
            let c = o2h_corollary_c(&alg, &s, mode)?;
            report.push(Check::new(&format!("{}, S={:?}", alg.name, c.set), ANCHOR_O2H, None, c.lhs, Relation::Ge, c.rhs, 0.0));
        }
    }
    Ok(())
}

const ANCHOR_MAR: &str = "Pr[Ã[H, y] → (x*, z) ∧ V] ≥ Pr[A^{H[x*→y]} → (x*, z) ∧ V] / (2q+1)^{2k}";
const ANCHOR_ORDERED: &str = "outputs ⊥ unless every x'_i is a prefix of x'_k";

fn push_mar(report: &mut Report, anchor: &str, checks: Vec<MarCheck>) {
    for c in checks {
        let name = format!("{}, x*={:?}, y={:?}", c.algorithm, c.target, c.y);
        report.push(Check::new(&name, anchor, None, c.lhs, Relation::Ge, c.factor * c.rhs, 0.0));
    }
}

fn mar(report: &mut Report, mode: Parallelism) -> Result<()> {
    let h = ClassicalOracle::from_table(flat(2)?, 2, vec![0, 1])?;
    for alg in single_zoo(2, 2, 2)? {
        push_mar(report, ANCHOR_MAR, check_mar_general(&alg, &h, 1, |_, y, z| z[0] == y[0], mode)?);
    }
    for alg in pair_zoo(2, 2, 2)? {
        push_mar(report, ANCHOR_MAR, check_mar_general(&alg, &h, 2, |_, _, _| true, mode)?);
    }
    Ok(())
}

fn mar_ordered_check(report: &mut Report, mode: Parallelism) -> Result<()> {
    let h = ClassicalOracle::zero(Arc::new(Domain::prefixes(2, 2)?), 2)?;
    for alg in prefix_zoo(2, 2)? {
        push_mar(report, ANCHOR_MAR, check_mar_ordered(&alg, &h, 2, mode)?);
    }
    let bad = prefix_zoo(2, 2)?
        .into_iter()
        .find(|a| a.name == "inconsistent")
        .ok_or_else(|| Error::InvalidParameter("missing zoo entry".into()))?;
    let bottom = bottom_probability(&mar_ordered(&bad, &h, &[1, 1], mode)?);
    // ⊥ exactly when a target measures the first query: 12 of 17 schedules.
    report.push(Check::new("inconsistent claims give bottom", ANCHOR_ORDERED, None, (bottom - 12.0 / 17.0).abs(), Relation::Le, 0.0, EXACT));
    Ok(())
}

const ANCHOR_ADJUST: &str = "U_m maps |ψ_ε⟩ to the uniform superposition over H with H(m_1..m_i) = 1 for all i";

/// `|ψ_ε⟩` conditioned on every bit of `prefix_bits` being 1, normalized.
fn adjusted_target(eps: f64, bits: usize, prefix_bits: &[usize]) -> Vec<C64> {
    let mask: u64 = prefix_bits.iter().map(|&b| 1u64 << b).sum();
    let free = bits - prefix_bits.len();
    (0..1u64 << bits)
        .map(|h| {
            if h & mask != mask {
                return C64::new(0.0, 0.0);
            }
            let ones = (h & !mask).count_ones() as i32;
            C64::new((eps.powi(ones) * (1.0 - eps).powi(free as i32 - ones)).sqrt(), 0.0)
        })
        .collect()
}

fn adjuster(report: &mut Report) -> Result<()> {
    for (n, d) in [(1, 10), (1, 4), (1, 2), (1, 1)] {
        let eps = ratio(n, d);
        let e = to_f64(&eps);
        for (bits, prefix) in [(2usize, vec![1usize]), (3, vec![0, 2]), (4, vec![1, 2, 3])] {
            let adj = ExactAdjuster::new(&eps, bits, prefix.clone())?;
            let u = adj.matrix()?;
            report.push(Check::new(&format!("unitary, eps={eps}, {bits} bits"), ANCHOR_ADJUST, None, u.deviation(), Relation::Le, 0.0, 1e-9));
            let out = u.apply(&nalgebra::DVector::from_vec(sparse_superposition(e, bits)));
            let dist = pure_distance(out.as_slice(), &adjusted_target(e, bits, &prefix));
            report.push(Check::new(&format!("eps={eps}, {bits} bits, prefixes {prefix:?}"), ANCHOR_ADJUST, None, dist, Relation::Le, 0.0, PURE));
        }
    }
    Ok(())
}

const ANCHOR_ADJUST_EFF: &str = "the efficient adjuster maps the uniform key superposition to the keys whose function is 1 on every prefix";

fn adjuster_eff(report: &mut Report) -> Result<()> {
    for eps in [ratio(1, 4), ratio(1, 2)] {
        let fam = TwoQWiseFamily::for_epsilon(2, 2, &eps, 1)?;
        let n = fam.key_count() as usize;
        let uniform = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
        for m in [[0u64, 0], [0, 1], [1, 0], [1, 1]] {
            let prefixes = vec![fam.domain().index(&m[..1])?, fam.domain().index(&m)?];
            let adj = EfficientAdjuster::new(&fam, prefixes)?;
            report.push(Check::new(&format!("unitary, eps={eps}, m={m:?}"), ANCHOR_ADJUST_EFF, None, adj.deviation(), Relation::Le, 0.0, 1e-9));
            let out = adj.apply(&uniform)?;
            let mut target = vec![C64::new(0.0, 0.0); n];
            for k in adj.target_keys()? {
                target[k as usize] = C64::new(1.0, 0.0);
            }
            let dist = pure_distance(&out, &target);
            report.push(Check::new(&format!("eps={eps}, m={m:?}"), ANCHOR_ADJUST_EFF, None, dist, Relation::Le, 0.0, PURE));
        }
    }
    Ok(())
}

const ANCHOR_FINAL: &str = "conditioned on B = 1, Cont is in the state |φ_ε⟩ ∝ |0⟩ + ε^{k/2}|1⟩";

fn final_state(report: &mut Report) -> Result<()> {
    let p: ProtocolRef = Arc::new(ToyQr::new(1)?);
    let (x, w) = (4, 2);
    let env = SimEnv::new(p.clone(), x, Some(w));
    let support = Support::honest(p.as_ref(), x, w)?;
    for (n, d) in [(1, 10), (1, 4), (1, 2), (1, 1)] {
        let eps = ratio(n, d);
        let e = to_f64(&eps);
        let ek = e * e;
        let m = VerifierMachine::superposition(p.clone(), x, eps.clone(), support.clone())?;
        let run = run_interaction(&m, &env, AuxMode::Coherent)?;
        let cont = run.cont_given_accept(None)?;
        let td = trace_distance(&cont, &phi_eps(e, 2)?)?;
        report.push(Check::new(&format!("cont state, eps={eps}"), ANCHOR_FINAL, Some(x), td, Relation::Le, 0.0, 1e-9));
        let p1 = cont.matrix()[(1, 1)].re;
        report.push(Check::new(&format!("Pr[Cont=1 | B=1], eps={eps}"), ANCHOR_FINAL, Some(x), (p1 - ek / (1.0 + ek)).abs(), Relation::Le, 0.0, 1e-9));
        let acc = run.accept()?;
        report.push(Check::new(&format!("Pr[B=1], eps={eps}"), ANCHOR_FINAL, Some(x), (acc - (1.0 + ek) / 2.0).abs(), Relation::Le, 0.0, EXACT));
    }
    // Measuring Cont collapses it; the accepted state is then far from φ_ε.
    let m = VerifierMachine::superposition(p.clone(), x, ratio(1, 4), support)?;
    let run = run_simulator(&m, &ContMeasuring, &env, AuxMode::Coherent, None, &Transparent, Parallelism::Sequential)?;
    let td = trace_distance(&run.cont_given_accept(None)?, &phi_eps(0.25, 2)?)?;
    report.push(Check::new("measuring cont is detected", ANCHOR_FINAL, Some(x), (td - 4.0 / 17.0).abs(), Relation::Le, 0.0, 1e-9));
    Ok(())
}

const ANCHOR_MARKOV: &str = "by Markov's inequality, Pr[Q > q] ≤ 1/2 for q = 2·E[Q]";

fn table_setup(eps: BigRational) -> Result<(VerifierMachine, SimEnv)> {
    let p: ProtocolRef = Arc::new(ToyTable::three_round(TableSoundness::Half));
    let support = Support::honest(p.as_ref(), 0, 1)?;
    Ok((VerifierMachine::random_aborting(p.clone(), 0, eps, support)?, SimEnv::new(p, 0, Some(1))))
}

fn geometric_sims() -> Vec<Box<dyn Simulator>> {
    let mut sims: Vec<Box<dyn Simulator>> = vec![Box::new(HonestWrapper)];
    sims.extend((1..=4).map(|cap| Box::new(Geometric { cap }) as Box<dyn Simulator>));
    sims
}

fn markov(report: &mut Report) -> Result<()> {
    let (m, env) = table_setup(ratio(1, 4))?;
    for sim in geometric_sims() {
        let q = markov_budget(&m, sim.as_ref(), &env)?;
        let e = to_f64(&expected_calls(&m, sim.as_ref(), &env)?);
        let halt = to_f64(&halting_probability(&m, sim.as_ref(), &env, q)?);
        report.push(Check::new(&format!("{}, q={q}, E[Q]={e}", sim.name()), ANCHOR_MARKOV, None, halt, Relation::Ge, 0.5, 0.0));
    }
    Ok(())
}

const ANCHOR_TRUNC: &str = "S_q runs S and aborts before the (q+1)-th invocation of V*";

fn truncation(report: &mut Report) -> Result<()> {
    let (m, env) = table_setup(ratio(1, 4))?;
    for sim in geometric_sims() {
        let q = markov_budget(&m, sim.as_ref(), &env)?;
        let linked = truncate(&m, sim.as_ref(), &env, q)?;
        let cut = linked.variants.iter().all(|v| v.steps.iter().filter(|s| matches!(s, crate::adversary::Step::Call)).count() <= q);
        report.push(Check::new(&format!("{} makes at most q={q} calls", sim.name()), ANCHOR_TRUNC, None, f64::from(u8::from(cut)), Relation::Ge, 1.0, 0.0));
        let full = run_simulator(&m, sim.as_ref(), &env, AuxMode::Coherent, None, &Transparent, Parallelism::Sequential)?;
        let capped = run_simulator(&m, sim.as_ref(), &env, AuxMode::Coherent, Some(q), &Transparent, Parallelism::Sequential)?;
        let b = capped.layout.position("B")?;
        let halted = capped.probability(|calls, _, d| calls <= q && d[b] == 1);
        let diff = (halted - full.accept_within(q)?).abs();
        report.push(Check::new(&format!("{} agrees with S when Q ≤ q", sim.name()), ANCHOR_TRUNC, None, diff, Relation::Le, 0.0, EXACT));
    }
    let q = 4;
    let mix = Mixture::padded("two-branch", vec![(ratio(1, 2), 0), (ratio(1, 2), 3 * q)])?;
    let rejected = truncate(&m, &mix, &env, q).is_err();
    report.push(Check::new("over-budget simulator is rejected", ANCHOR_TRUNC, None, f64::from(u8::from(rejected)), Relation::Ge, 1.0, 0.0));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_lemma_passes() {
        for name in LEMMA_NAMES {
            let r = verify_lemma(name, Parallelism::default()).unwrap();
            assert!(!r.checks.is_empty(), "{name}");
            assert!(r.ok(), "{name}: {:#?}", r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn unknown_lemma_is_an_error() {
        assert!(verify_lemma("nope", Parallelism::Sequential).is_err());
    }

    #[test]
    fn total_variation_of_disjoint_points_is_one() {
        let a = Dist::from([(vec![0], 1.0)]);
        let b = Dist::from([(vec![1], 1.0)]);
        assert_eq!(total_variation(&a, &b), 1.0);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
