use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::exec::{Branch, Slot};
use super::program::{Query, Step};
use crate::hashfam::{sparse_superposition, u_prime_dagger_column, EfficientAdjuster, TwoQWiseFamily};
use crate::oracle::{to_f64, ClassicalOracle, Domain, RangeGroup, ValueDist};
use crate::protocol::{Protocol, ProtocolRef};
use crate::qsim::{RegisterLayout, StateVector, C64};
use crate::{Error, Result};

/// Query label of `H` in the compiled random-aborting and public-coin machines.
pub const H_LABEL: usize = 0;
/// Query label of `F[x, r]` in the compiled random-aborting machine.
pub const F_LABEL: usize = 1;
/// Query label of `F*[x, H]` in the three-round machine.
pub const O_LABEL: usize = 0;
/// Query label of the acceptance oracle in the three-round machine.
pub const ACC_LABEL: usize = 1;

/// Largest predicate register materialized by the register machines.
pub const MAX_SUPPORT_BITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierKind {
    RandomAborting,
    Superposition,
    SuperpositionEfficient,
    PublicCoin,
    ThreeRound,
}

/// How the verifier's auxiliary input is prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxMode {
    /// The coherent superposition.
    Coherent,
    /// `(R, H)` measured first: a mixture of basis states with exact weights.
    Measured,
}

/// Named auxiliary states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxState {
    /// Uniform `r` and Bernoulli-weighted predicate tables.
    PsiEps,
    /// `|+⟩_Cont ⊗ |ψ_ε⟩`.
    PsiTildeEps,
    /// Uniform over the keys of a hash family, times uniform `r`.
    PsiQKey,
}

/// The prefix points whose predicate bits a register machine materializes.
///
/// Untouched points of a Bernoulli table stay in a product state, so
/// dropping them is exact; touching one is a [`Error::SupportViolation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    domain: Arc<Domain>,
    points: Vec<u64>,
    bit: BTreeMap<u64, usize>,
}

impl Support {
    pub fn new(domain: Arc<Domain>, points: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut points: Vec<u64> = points.into_iter().collect();
        points.sort_unstable();
        points.dedup();
        if points.len() > MAX_SUPPORT_BITS {
            return Err(Error::DomainTooLarge { size: points.len() as u128, limit: MAX_SUPPORT_BITS as u128 });
        }
        if let Some(&p) = points.iter().find(|&&p| p >= domain.size()) {
            return Err(Error::PointOutOfDomain(p));
        }
        let bit = points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Ok(Self { domain, points, bit })
    }

    /// Every nonempty prefix of the given transcripts.
    pub fn of_transcripts(p: &dyn Protocol, transcripts: &[Vec<u64>]) -> Result<Self> {
        let domain = Arc::new(p.transcript_domain()?);
        let mut pts = Vec::new();
        for t in transcripts {
            pts.extend(domain.prefix_indices(t)?);
        }
        Self::new(domain, pts)
    }

    /// Honest-prover transcripts for every `r` and every pattern of
    /// aborted replies.
    pub fn honest(p: &dyn Protocol, x: u64, witness: u64) -> Result<Self> {
        Self::of_transcripts(p, &honest_transcripts(p, x, witness))
    }

    pub fn with_transcripts(&self, p: &dyn Protocol, extra: &[Vec<u64>]) -> Result<Self> {
        let mut pts = self.points.clone();
        for t in extra {
            pts.extend(self.domain.prefix_indices(t)?);
        }
        Self::new(self.domain.clone(), pts).map_err(|e| match e {
            Error::DomainTooLarge { .. } => Error::InvalidParameter(format!("support for {} too large", p.name())),
            e => e,
        })
    }

    pub fn bits(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn bit(&self, point: u64) -> Result<usize> {
        self.bit.get(&point).copied().ok_or_else(|| {
            let shown = self.domain.point(point).map(|t| format!("{t:?}")).unwrap_or_else(|_| point.to_string());
            Error::SupportViolation(shown)
        })
    }
}

/// Transcripts of the honest prover when each reply is either the real one
/// or the abort symbol 0, over every `r`.
pub fn honest_transcripts(p: &dyn Protocol, x: u64, witness: u64) -> Vec<Vec<u64>> {
    let k = p.rounds();
    let mut out = Vec::new();
    for r in 0..p.randomness() {
        for pattern in 0..1u64 << (k - 1) {
            let mut msgs = Vec::with_capacity(k);
            let mut received = Vec::with_capacity(k - 1);
            for i in 0..k {
                msgs.push(p.prover_message(x, witness, &received));
                if i + 1 < k {
                    let reply = if pattern >> i & 1 == 1 { 0 } else { p.verifier_message(x, r, &msgs) };
                    received.push(reply);
                }
            }
            if !out.contains(&msgs) {
                out.push(msgs);
            }
        }
    }
    out
}

#[derive(Clone)]
enum Body {
    Registers { support: Arc<Support> },
    Keyed { fam: Arc<TwoQWiseFamily> },
    HCompiled { slots: Vec<Slot> },
    PublicCoin { slots: Vec<Slot> },
    ThreeRound { slots: Vec<Slot>, acc_real: bool },
}

/// A malicious verifier as an explicit step program over its own registers
/// `Count, M1..Mk, M, B` plus kind-specific ones.
///
/// Register machines keep `R`, the predicate table `H` and `Cont` in
/// quantum registers. Compiled machines keep the random functions in
/// oracle slots and spend real queries on them, which is what the
/// reductions intercept.
#[derive(Clone)]
pub struct VerifierMachine {
    kind: VerifierKind,
    protocol: ProtocolRef,
    x: u64,
    eps: Option<BigRational>,
    body: Body,
}

impl std::fmt::Debug for VerifierMachine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerifierMachine")
            .field("kind", &self.kind)
            .field("protocol", &self.protocol.name())
            .field("x", &self.x)
            .field("eps", &self.eps)
            .finish()
    }
}

fn check_eps(eps: &BigRational, allow_zero: bool) -> Result<()> {
    if *eps < BigRational::zero() || (*eps == BigRational::zero() && !allow_zero) || *eps > BigRational::one() {
        return Err(Error::InvalidParameter(format!("ε = {eps} is out of range")));
    }
    Ok(())
}

fn msg_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("M{i}")).collect()
}

impl VerifierMachine {
    /// Random-aborting verifier with `(R, H)` in registers.
    pub fn random_aborting(protocol: ProtocolRef, x: u64, eps: BigRational, support: Support) -> Result<Self> {
        check_eps(&eps, true)?;
        Ok(Self { kind: VerifierKind::RandomAborting, protocol, x, eps: Some(eps), body: Body::Registers { support: Arc::new(support) } })
    }

    /// `Cont`-controlled verifier with the inefficient adjuster.
    pub fn superposition(protocol: ProtocolRef, x: u64, eps: BigRational, support: Support) -> Result<Self> {
        check_eps(&eps, false)?;
        Ok(Self { kind: VerifierKind::Superposition, protocol, x, eps: Some(eps), body: Body::Registers { support: Arc::new(support) } })
    }

    /// `Cont`-controlled verifier whose predicate is a key of `fam`.
    pub fn superposition_efficient(protocol: ProtocolRef, x: u64, fam: TwoQWiseFamily) -> Result<Self> {
        if fam.rounds() != protocol.rounds() || fam.domain().alphabet() != protocol.alphabet() {
            return Err(Error::InvalidParameter("hash family does not match the protocol".into()));
        }
        if fam.base().key_count() > u64::MAX as u128 {
            return Err(Error::DomainTooLarge { size: fam.base().key_count(), limit: u64::MAX as u128 });
        }
        Ok(Self {
            kind: VerifierKind::SuperpositionEfficient,
            protocol,
            x,
            eps: Some(fam.epsilon()),
            body: Body::Keyed { fam: Arc::new(fam) },
        })
    }

    /// Random-aborting verifier with `r` baked into the `F` slot and the
    /// predicate `H` held as an oracle slot: each call costs `2k` queries to
    /// `H` (label [`H_LABEL`]) and one to `F` (label [`F_LABEL`]).
    pub fn random_aborting_compiled(protocol: ProtocolRef, x: u64, h: Slot, f: Slot) -> Result<Self> {
        let domain = protocol.transcript_domain()?;
        if **h.oracle.domain() != domain || **f.oracle.domain() != domain {
            return Err(Error::InvalidParameter("H and F must be defined on the transcript domain".into()));
        }
        Ok(Self { kind: VerifierKind::RandomAborting, protocol, x, eps: None, body: Body::HCompiled { slots: vec![h, f] } })
    }

    /// `F[x, r]` as a slot.
    pub fn f_slot(protocol: &ProtocolRef, x: u64, r: u64) -> Result<Slot> {
        let domain = Arc::new(protocol.transcript_domain()?);
        let p = protocol.clone();
        let d2 = domain.clone();
        let oracle = ClassicalOracle::from_fn(domain, protocol.alphabet().max(2), move |i| {
            let pt = d2.point(i).expect("index from the domain");
            p.f_value(x, r, &pt)
        });
        Ok(Slot::fixed(oracle))
    }

    /// Public-coin verifier answering `H(m_1..m_i)` with `H` a lazily
    /// sampled uniform function into the challenge space.
    pub fn public_coin(protocol: ProtocolRef, x: u64) -> Result<Self> {
        protocol.check_public_coin()?;
        let c = protocol.require_public_coin()?;
        let domain = Arc::new(Domain::prefixes(protocol.alphabet(), protocol.rounds() - 1)?);
        let h = Slot::lazy(domain, ValueDist::uniform(c))?;
        Ok(Self { kind: VerifierKind::PublicCoin, protocol, x, eps: None, body: Body::PublicCoin { slots: vec![h] } })
    }

    /// Three-round verifier with `H: M → R` lazily uniform, answering
    /// `F[x, H(m_1)](m_1)` (label [`O_LABEL`]) and checking acceptance
    /// under `H(m_1)` (label [`ACC_LABEL`]).
    pub fn three_round(protocol: ProtocolRef, x: u64) -> Result<Self> {
        if protocol.rounds() != 2 {
            return Err(Error::ProtocolProperty { name: protocol.name(), property: "a three-round protocol".into() });
        }
        let domain = Arc::new(Domain::flat(protocol.alphabet())?);
        let h = Slot::lazy(domain, ValueDist::uniform(protocol.randomness()))?;
        Ok(Self {
            kind: VerifierKind::ThreeRound,
            protocol,
            x,
            eps: None,
            body: Body::ThreeRound { slots: vec![h], acc_real: true },
        })
    }

    /// Three-round machine whose acceptance oracle is the empty set. Queries
    /// to it still happen, so their inputs can be measured.
    pub fn with_empty_acceptance(mut self) -> Result<Self> {
        match &mut self.body {
            Body::ThreeRound { acc_real, .. } => *acc_real = false,
            _ => return Err(Error::InvalidParameter("only the three-round machine has an acceptance oracle".into())),
        }
        Ok(self)
    }

    /// Replace the oracle slots of a compiled machine.
    pub fn with_slots(mut self, new: Vec<Slot>) -> Result<Self> {
        match &mut self.body {
            Body::HCompiled { slots } | Body::PublicCoin { slots } | Body::ThreeRound { slots, .. } => {
                if slots.len() != new.len() {
                    return Err(Error::InvalidParameter("slot count mismatch".into()));
                }
                *slots = new;
            }
            _ => return Err(Error::InvalidParameter("register machines have no oracle slots".into())),
        }
        Ok(self)
    }

    pub fn kind(&self) -> VerifierKind {
        self.kind
    }

    pub fn protocol(&self) -> &ProtocolRef {
        &self.protocol
    }

    pub fn statement(&self) -> u64 {
        self.x
    }

    pub fn epsilon(&self) -> Option<&BigRational> {
        self.eps.as_ref()
    }

    pub fn support(&self) -> Option<&Support> {
        match &self.body {
            Body::Registers { support } => Some(support),
            _ => None,
        }
    }

    pub fn aux_state(&self) -> AuxState {
        match self.kind {
            VerifierKind::RandomAborting => AuxState::PsiEps,
            VerifierKind::Superposition => AuxState::PsiTildeEps,
            _ => AuxState::PsiQKey,
        }
    }

    pub fn slots(&self) -> Vec<Slot> {
        match &self.body {
            Body::HCompiled { slots } | Body::PublicCoin { slots } | Body::ThreeRound { slots, .. } => slots.clone(),
            _ => Vec::new(),
        }
    }

    pub fn has_cont(&self) -> bool {
        matches!(self.kind, VerifierKind::Superposition | VerifierKind::SuperpositionEfficient)
    }

    pub fn output_registers(&self) -> Vec<&'static str> {
        if self.has_cont() {
            vec!["Cont", "B"]
        } else {
            vec!["B"]
        }
    }

    /// Oracle queries billed per call, by label.
    pub fn queries_per_call(&self) -> Vec<(usize, usize)> {
        let k = self.protocol.rounds();
        match &self.body {
            Body::HCompiled { .. } => vec![(H_LABEL, 2 * k), (F_LABEL, 1)],
            Body::PublicCoin { .. } => vec![(H_LABEL, 2 * (k - 1))],
            Body::ThreeRound { .. } => vec![(O_LABEL, 1), (ACC_LABEL, 1)],
            _ => Vec::new(),
        }
    }

    /// Registers owned by the verifier, including the message register `M`.
    pub fn registers(&self) -> Result<Vec<(String, u64)>> {
        let p = &self.protocol;
        let k = p.rounds();
        let alph = p.alphabet();
        let mut regs = vec![("Count".to_string(), k as u64)];
        regs.extend(msg_names(k).into_iter().map(|n| (n, alph)));
        regs.push(("M".into(), alph));
        regs.push(("B".into(), 2));
        match &self.body {
            Body::Registers { support } => {
                regs.push(("R".into(), p.randomness()));
                regs.push(("H".into(), 1u64 << support.bits()));
                if self.has_cont() {
                    regs.push(("Cont".into(), 2));
                }
            }
            Body::Keyed { fam } => {
                regs.push(("R".into(), p.randomness()));
                regs.push(("K".into(), fam.base().key_count() as u64));
                regs.extend((1..=k).map(|i| (format!("A{i}"), fam.a())));
                regs.push(("Cont".into(), 2));
            }
            Body::HCompiled { .. } => {
                regs.push(("P".into(), p.transcript_domain()?.size() + 1));
                regs.extend((1..=k).map(|i| (format!("a{i}"), 2)));
            }
            Body::PublicCoin { .. } => {
                let c = p.require_public_coin()?;
                regs.push(("P".into(), Domain::prefixes(alph, k - 1)?.size() + 1));
                regs.extend((1..k).map(|i| (format!("c{i}"), c)));
            }
            Body::ThreeRound { .. } => {}
        }
        Ok(regs)
    }

    /// Initial branches: the auxiliary state, every other register zero.
    pub fn initial(&self, layout: Arc<RegisterLayout>, mode: AuxMode) -> Result<Vec<Branch>> {
        let p = &self.protocol;
        let nr = p.randomness();
        let uniform = |n: u64| vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n as usize];
        let plus = vec![C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
        match (&self.body, mode) {
            (Body::Registers { support }, AuxMode::Coherent) => {
                let eps = to_f64(self.eps.as_ref().expect("register machines carry ε"));
                let mut factors = vec![("R", uniform(nr)), ("H", sparse_superposition(eps, support.bits()))];
                if self.has_cont() {
                    factors.push(("Cont", plus));
                }
                Ok(vec![Branch::new(StateVector::product(layout, &factors)?, Vec::new())])
            }
            (Body::Registers { support }, AuxMode::Measured) => {
                if self.has_cont() {
                    return Err(Error::InvalidParameter("measured auxiliary input is only defined without Cont".into()));
                }
                let eps = self.eps.clone().expect("register machines carry ε");
                let bits = support.bits();
                let pr = BigRational::new(BigInt::one(), BigInt::from(nr));
                let mut out = Vec::new();
                for r in 0..nr {
                    for h in 0..1u64 << bits {
                        let ones = h.count_ones() as usize;
                        let w = &pr * pow(&eps, ones) * pow(&(BigRational::one() - &eps), bits - ones);
                        if w.is_zero() {
                            continue;
                        }
                        let s = StateVector::basis(layout.clone(), &[("R", r), ("H", h)])?;
                        out.push(Branch::new(s, Vec::new()).with_weight(w));
                    }
                }
                Ok(out)
            }
            (Body::Keyed { fam }, AuxMode::Coherent) => {
                let k = p.rounds();
                let names: Vec<String> = (1..=k).map(|i| format!("A{i}")).collect();
                let mut factors = vec![("R", uniform(nr)), ("K", uniform(fam.base().key_count() as u64)), ("Cont", plus)];
                for n in &names {
                    factors.push((n.as_str(), uniform(fam.a())));
                }
                Ok(vec![Branch::new(StateVector::product(layout, &factors)?, Vec::new())])
            }
            (Body::Keyed { .. }, AuxMode::Measured) => {
                Err(Error::InvalidParameter("measured auxiliary input is only defined without Cont".into()))
            }
            (Body::HCompiled { slots } | Body::PublicCoin { slots } | Body::ThreeRound { slots, .. }, _) => {
                Ok(vec![Branch::new(StateVector::zero(layout), slots.clone())])
            }
        }
    }

    /// Steps of one forward invocation, starting with a [`Step::Call`] marker.
    pub fn call_steps(&self, layout: &RegisterLayout) -> Result<Vec<Step>> {
        let regs = CoreRegs::locate(layout, self.protocol.rounds())?;
        let mut steps = vec![Step::Call];
        match &self.body {
            Body::Registers { support } => {
                let support = support.clone();
                let h_pos = layout.position("H")?;
                let predicate: Predicate = Arc::new(move |d: &[u64], point: u64| Ok(d[h_pos] >> support.bit(point)? & 1 == 1));
                self.register_steps(layout, &regs, predicate, &mut steps)?;
                if self.has_cont() {
                    steps.push(self.exact_adjuster_step(layout, &regs)?);
                }
            }
            Body::Keyed { fam } => {
                let k_pos = layout.position("K")?;
                let a_pos: Vec<usize> = (1..=regs.k).map(|i| layout.position(&format!("A{i}"))).collect::<Result<_>>()?;
                let f2 = fam.clone();
                let a2 = a_pos.clone();
                let predicate: Predicate = Arc::new(move |d: &[u64], point: u64| {
                    let offs: Vec<u64> = a2.iter().map(|&p| d[p]).collect();
                    f2.eval_parts(d[k_pos] as u128, &offs, point)
                });
                self.register_steps(layout, &regs, predicate, &mut steps)?;
                steps.push(self.efficient_adjuster_step(&regs, fam.clone(), k_pos, a_pos)?);
            }
            Body::HCompiled { .. } => self.h_compiled_steps(layout, &regs, &mut steps)?,
            Body::PublicCoin { .. } => self.public_coin_steps(layout, &regs, &mut steps)?,
            Body::ThreeRound { acc_real, .. } => self.three_round_steps(&regs, *acc_real, &mut steps)?,
        }
        Ok(steps)
    }

    fn register_steps(&self, layout: &RegisterLayout, regs: &CoreRegs, h: Predicate, steps: &mut Vec<Step>) -> Result<()> {
        let r_pos = layout.position("R")?;
        let cont = if self.has_cont() { Some(layout.position("Cont")?) } else { None };
        let core = Arc::new(UStar {
            regs: regs.clone(),
            protocol: self.protocol.clone(),
            x: self.x,
            domain: Arc::new(self.protocol.transcript_domain()?),
            r_pos,
            cont,
            h,
        });
        let c2 = core.clone();
        steps.push(Step::map(move |d| core.forward(d), move |d| c2.backward(d)));
        Ok(())
    }

    fn exact_adjuster_step(&self, layout: &RegisterLayout, regs: &CoreRegs) -> Result<Step> {
        let support = self.support().expect("register body").clone();
        let eps = to_f64(self.eps.as_ref().expect("ε"));
        let h_pos = layout.position("H")?;
        let cont = layout.position("Cont")?;
        let domain = Arc::new(self.protocol.transcript_domain()?);
        let make = move |inverse: bool| {
            let support = support.clone();
            let domain = domain.clone();
            let regs = regs.clone();
            move |d: &[u64], out: &mut Vec<(Vec<u64>, C64)>| -> Result<()> {
                out.clear();
                if d[cont] != 0 || d[regs.count] != 0 {
                    out.push((d.to_vec(), C64::new(1.0, 0.0)));
                    return Ok(());
                }
                let t = regs.messages(d, regs.k);
                let bits: Vec<usize> = domain.prefix_indices(&t)?.into_iter().map(|p| support.bit(p)).collect::<Result<_>>()?;
                let mut cur = vec![(d[h_pos], 1.0f64)];
                for &bit in &bits {
                    let mut next = Vec::with_capacity(cur.len() * 2);
                    for (h, a) in cur {
                        let col = if inverse { u_prime_column(eps, h >> bit & 1) } else { u_prime_dagger_column(eps, h >> bit & 1) };
                        for (nb, amp) in col.iter().enumerate() {
                            if *amp != 0.0 {
                                next.push(((h & !(1 << bit)) | (nb as u64) << bit, a * amp));
                            }
                        }
                    }
                    cur = next;
                }
                for (h, a) in cur {
                    let mut img = d.to_vec();
                    img[h_pos] = h;
                    out.push((img, C64::new(a, 0.0)));
                }
                Ok(())
            }
        };
        Ok(Step::Columns { fwd: Arc::new(make(false)), inv: Arc::new(make(true)) })
    }

    fn efficient_adjuster_step(&self, regs: &CoreRegs, fam: Arc<TwoQWiseFamily>, k_pos: usize, a_pos: Vec<usize>) -> Result<Step> {
        let cont = regs.cont_hint.ok_or_else(|| Error::Layout("missing Cont".into()))?;
        let make = move |inverse: bool| {
            let fam = fam.clone();
            let a_pos = a_pos.clone();
            let regs = regs.clone();
            move |d: &[u64], out: &mut Vec<(Vec<u64>, C64)>| -> Result<()> {
                out.clear();
                if d[cont] != 0 || d[regs.count] != 0 {
                    out.push((d.to_vec(), C64::new(1.0, 0.0)));
                    return Ok(());
                }
                let t = regs.messages(d, regs.k);
                let prefixes = fam.domain().prefix_indices(&t)?;
                let adj = EfficientAdjuster::new(&fam, prefixes)?;
                let offs: Vec<u64> = a_pos.iter().map(|&p| d[p]).collect();
                let mut col = Vec::new();
                if inverse {
                    adj.column_inverse(d[k_pos] as u128, &offs, &mut col);
                } else {
                    adj.column(d[k_pos] as u128, &offs, &mut col);
                }
                for (o, a) in col {
                    let mut img = d.to_vec();
                    for (&p, v) in a_pos.iter().zip(o) {
                        img[p] = v;
                    }
                    out.push((img, a));
                }
                Ok(())
            }
        };
        Ok(Step::Columns { fwd: Arc::new(make(false)), inv: Arc::new(make(true)) })
    }

    fn h_compiled_steps(&self, layout: &RegisterLayout, regs: &CoreRegs, steps: &mut Vec<Step>) -> Result<()> {
        let k = regs.k;
        let domain = Arc::new(self.protocol.transcript_domain()?);
        let p_pos = layout.position("P")?;
        let a_pos: Vec<usize> = (1..=k).map(|i| layout.position(&format!("a{i}"))).collect::<Result<_>>()?;
        steps.push(regs.count_swap());
        let point_of = {
            let regs = regs.clone();
            let domain = domain.clone();
            move |d: &[u64], j: usize| -> Result<u64> {
                let i = regs.round(d);
                domain.index(&regs.messages(d, j.min(i)))
            }
        };
        let predicate_pass = |j: usize, steps: &mut Vec<Step>| {
            let pf = point_of.clone();
            let pi = point_of.clone();
            let dim = layout.dim(p_pos);
            steps.push(Step::map(
                move |d| {
                    d[p_pos] = (d[p_pos] + pf(d, j)? + 1) % dim;
                    Ok(())
                },
                move |d| {
                    d[p_pos] = (d[p_pos] + dim - (pi(d, j)? + 1) % dim) % dim;
                    Ok(())
                },
            ));
            let read: super::program::PointRead = Arc::new(move |d: &[u64]| d[p_pos].checked_sub(1));
            let a = a_pos[j - 1];
            let flip: super::program::ValueWrite = Arc::new(move |d: &mut [u64], v| d[a] ^= v & 1);
            steps.push(Step::Query(Query { label: H_LABEL, slot: 0, input: read.clone(), read, add: flip.clone(), sub: flip }));
            let pf = point_of.clone();
            let pi = point_of.clone();
            steps.push(Step::map(
                move |d| {
                    d[p_pos] = (d[p_pos] + dim - (pf(d, j)? + 1) % dim) % dim;
                    Ok(())
                },
                move |d| {
                    d[p_pos] = (d[p_pos] + pi(d, j)? + 1) % dim;
                    Ok(())
                },
            ));
        };
        for j in 1..=k {
            predicate_pass(j, steps);
        }
        let alph = self.protocol.alphabet();
        let group = RangeGroup::for_range(alph);
        let read: super::program::PointRead = {
            let regs = regs.clone();
            let domain = domain.clone();
            let a_pos = a_pos.clone();
            Arc::new(move |d: &[u64]| {
                let i = regs.round(d);
                let marked = if i < k { d[a_pos[i - 1]] == 1 } else { a_pos.iter().all(|&p| d[p] == 1) };
                marked.then(|| domain.index(&regs.messages(d, i)).expect("transcript digits are in range"))
            })
        };
        let (r2, r3) = (regs.clone(), regs.clone());
        steps.push(Step::Query(Query {
            label: F_LABEL,
            slot: 1,
            input: read.clone(),
            read,
            add: Arc::new(move |d: &mut [u64], v| {
                if r2.round(d) < k {
                    d[r2.msg] = group.add(d[r2.msg], v, alph);
                } else {
                    d[r2.b] ^= v & 1;
                }
            }),
            sub: Arc::new(move |d: &mut [u64], v| {
                if r3.round(d) < k {
                    d[r3.msg] = group.sub(d[r3.msg], v, alph);
                } else {
                    d[r3.b] ^= v & 1;
                }
            }),
        }));
        for j in (1..=k).rev() {
            predicate_pass(j, steps);
        }
        Ok(())
    }

    fn public_coin_steps(&self, layout: &RegisterLayout, regs: &CoreRegs, steps: &mut Vec<Step>) -> Result<()> {
        let k = regs.k;
        let alph = self.protocol.alphabet();
        let c = self.protocol.require_public_coin()?;
        let domain = Arc::new(Domain::prefixes(alph, k - 1)?);
        let p_pos = layout.position("P")?;
        let c_pos: Vec<usize> = (1..k).map(|i| layout.position(&format!("c{i}"))).collect::<Result<_>>()?;
        let dim = layout.dim(p_pos);
        steps.push(regs.count_swap());
        let point_of = {
            let regs = regs.clone();
            let domain = domain.clone();
            move |d: &[u64], j: usize| -> Result<u64> {
                let i = regs.round(d);
                domain.index(&regs.messages(d, if i == k { j } else { i }))
            }
        };
        let pass = |j: usize, uncompute: bool, steps: &mut Vec<Step>| {
            let (pf, pi) = (point_of.clone(), point_of.clone());
            steps.push(Step::map(
                move |d| {
                    d[p_pos] = (d[p_pos] + pf(d, j)? + 1) % dim;
                    Ok(())
                },
                move |d| {
                    d[p_pos] = (d[p_pos] + dim - (pi(d, j)? + 1) % dim) % dim;
                    Ok(())
                },
            ));
            let read: super::program::PointRead = Arc::new(move |d: &[u64]| d[p_pos].checked_sub(1));
            let cp = c_pos[j - 1];
            let add: super::program::ValueWrite = Arc::new(move |d: &mut [u64], v| d[cp] = (d[cp] + v) % c);
            let sub: super::program::ValueWrite = Arc::new(move |d: &mut [u64], v| d[cp] = (d[cp] + c - v % c) % c);
            let q = Query { label: H_LABEL, slot: 0, input: read.clone(), read, add, sub };
            steps.push(Step::Query(if uncompute { q.inverse() } else { q }));
            let (pf, pi) = (point_of.clone(), point_of.clone());
            steps.push(Step::map(
                move |d| {
                    d[p_pos] = (d[p_pos] + dim - (pf(d, j)? + 1) % dim) % dim;
                    Ok(())
                },
                move |d| {
                    d[p_pos] = (d[p_pos] + pi(d, j)? + 1) % dim;
                    Ok(())
                },
            ));
        };
        for j in 1..k {
            pass(j, false, steps);
        }
        let group = RangeGroup::for_range(alph);
        let (r1, r2) = (regs.clone(), regs.clone());
        let (p1, p2) = (self.protocol.clone(), self.protocol.clone());
        let (c1, c2) = (c_pos.clone(), c_pos.clone());
        let x = self.x;
        let logic = move |regs: &CoreRegs, p: &ProtocolRef, cp: &[usize], d: &mut [u64], forward: bool| -> Result<()> {
            if regs.round(d) < k {
                d[regs.msg] = if forward { group.add(d[regs.msg], d[cp[0]], alph) } else { group.sub(d[regs.msg], d[cp[0]], alph) };
            } else {
                let cs: Vec<u64> = cp.iter().map(|&q| d[q]).collect();
                let r = p.join_challenges(&cs)?;
                if p.decide(x, r, &regs.messages(d, k)) {
                    d[regs.b] ^= 1;
                }
            }
            Ok(())
        };
        let l2 = logic;
        steps.push(Step::map(move |d| logic(&r1, &p1, &c1, d, true), move |d| l2(&r2, &p2, &c2, d, false)));
        for j in (1..k).rev() {
            pass(j, true, steps);
        }
        Ok(())
    }

    fn three_round_steps(&self, regs: &CoreRegs, acc_real: bool, steps: &mut Vec<Step>) -> Result<()> {
        let alph = self.protocol.alphabet();
        let group = RangeGroup::for_range(alph);
        let x = self.x;
        steps.push(regs.count_swap());
        let (m1, m2, msg, b) = (regs.m[0], regs.m[1], regs.msg, regs.b);
        let count = regs.count;
        let o_read: super::program::PointRead = Arc::new(move |d: &[u64]| (d[count] == 1).then_some(d[m1]));
        let (pa, ps) = (self.protocol.clone(), self.protocol.clone());
        steps.push(Step::Query(Query {
            label: O_LABEL,
            slot: 0,
            input: o_read.clone(),
            read: o_read,
            add: Arc::new(move |d: &mut [u64], r| d[msg] = group.add(d[msg], pa.verifier_message(x, r, &[d[m1]]), alph)),
            sub: Arc::new(move |d: &mut [u64], r| d[msg] = group.sub(d[msg], ps.verifier_message(x, r, &[d[m1]]), alph)),
        }));
        let acc_input: super::program::PointRead = Arc::new(move |d: &[u64]| (d[count] == 0).then_some(d[m1] + alph * d[m2]));
        let acc_read: super::program::PointRead = Arc::new(move |d: &[u64]| (acc_real && d[count] == 0).then_some(d[m1]));
        let pa = self.protocol.clone();
        let flip: super::program::ValueWrite = Arc::new(move |d: &mut [u64], r| {
            if pa.decide(x, r, &[d[m1], d[m2]]) {
                d[b] ^= 1;
            }
        });
        steps.push(Step::Query(Query { label: ACC_LABEL, slot: 0, input: acc_input, read: acc_read, add: flip.clone(), sub: flip }));
        Ok(())
    }
}

/// Column `b` of `U′`.
fn u_prime_column(eps: f64, b: u64) -> [f64; 2] {
    let (s, c) = (eps.sqrt(), (1.0 - eps).sqrt());
    if b == 0 {
        [s, -c]
    } else {
        [c, s]
    }
}

fn pow(b: &BigRational, e: usize) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * b)
}

type Predicate = Arc<dyn Fn(&[u64], u64) -> Result<bool> + Send + Sync>;

/// Positions of the registers every machine has.
#[derive(Debug, Clone)]
struct CoreRegs {
    k: usize,
    count: usize,
    m: Vec<usize>,
    msg: usize,
    b: usize,
    cont_hint: Option<usize>,
}

impl CoreRegs {
    fn locate(layout: &RegisterLayout, k: usize) -> Result<Self> {
        Ok(Self {
            k,
            count: layout.position("Count")?,
            m: msg_names(k).iter().map(|n| layout.position(n)).collect::<Result<_>>()?,
            msg: layout.position("M")?,
            b: layout.position("B")?,
            cont_hint: layout.position("Cont").ok(),
        })
    }

    fn messages(&self, d: &[u64], len: usize) -> Vec<u64> {
        self.m[..len].iter().map(|&p| d[p]).collect()
    }

    /// 1-based round of the invocation in progress, after the count swap.
    fn round(&self, d: &[u64]) -> usize {
        if d[self.count] == 0 {
            self.k
        } else {
            d[self.count] as usize
        }
    }

    /// Advance `Count` and exchange `M` with the round's message register.
    fn count_swap(&self) -> Step {
        let (a, b) = (self.clone(), self.clone());
        Step::map(
            move |d| {
                let i = d[a.count] as usize + 1;
                d[a.count] = (i % a.k) as u64;
                d.swap(a.msg, a.m[i - 1]);
                Ok(())
            },
            move |d| {
                let i = b.round(d);
                d.swap(b.msg, b.m[i - 1]);
                d[b.count] = (i - 1) as u64;
                Ok(())
            },
        )
    }
}

/// `U*` (and `U_hon` on `Cont = 0`) as one reversible map.
struct UStar {
    regs: CoreRegs,
    protocol: ProtocolRef,
    x: u64,
    domain: Arc<Domain>,
    r_pos: usize,
    cont: Option<usize>,
    h: Predicate,
}

impl UStar {
    fn honest(&self, d: &[u64]) -> bool {
        self.cont.is_some_and(|c| d[c] == 0)
    }

    fn marked(&self, d: &[u64], t: &[u64]) -> Result<bool> {
        Ok(self.honest(d) || (self.h)(d, self.domain.index(t)?)?)
    }

    fn all_marked(&self, d: &[u64], t: &[u64]) -> Result<bool> {
        if self.honest(d) {
            return Ok(true);
        }
        for p in self.domain.prefix_indices(t)? {
            if !(self.h)(d, p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn reply(&self, d: &[u64], i: usize) -> Result<Option<u64>> {
        let t = self.regs.messages(d, i);
        Ok(self.marked(d, &t)?.then(|| self.protocol.verifier_message(self.x, d[self.r_pos], &t)))
    }

    fn final_flip(&self, d: &[u64]) -> Result<bool> {
        let t = self.regs.messages(d, self.regs.k);
        Ok(self.protocol.decide(self.x, d[self.r_pos], &t) && self.all_marked(d, &t)?)
    }

    fn forward(&self, d: &mut [u64]) -> Result<()> {
        let k = self.regs.k;
        let alph = self.protocol.alphabet();
        let group = RangeGroup::for_range(alph);
        let i = d[self.regs.count] as usize + 1;
        d[self.regs.count] = (i % k) as u64;
        d.swap(self.regs.msg, self.regs.m[i - 1]);
        if i < k {
            if let Some(v) = self.reply(d, i)? {
                d[self.regs.msg] = group.add(d[self.regs.msg], v, alph);
            }
        } else if self.final_flip(d)? {
            d[self.regs.b] ^= 1;
        }
        Ok(())
    }

    fn backward(&self, d: &mut [u64]) -> Result<()> {
        let alph = self.protocol.alphabet();
        let group = RangeGroup::for_range(alph);
        let i = self.regs.round(d);
        if i < self.regs.k {
            if let Some(v) = self.reply(d, i)? {
                d[self.regs.msg] = group.sub(d[self.regs.msg], v, alph);
            }
        } else if self.final_flip(d)? {
            d[self.regs.b] ^= 1;
        }
        d.swap(self.regs.msg, self.regs.m[i - 1]);
        d[self.regs.count] = (i - 1) as u64;
        Ok(())
    }
}
