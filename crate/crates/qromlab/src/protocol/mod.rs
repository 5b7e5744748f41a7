//! Classical interactive protocols in the `F[x, r]` form: the verifier's
//! reply to a prefix of prover messages and its final decision are both
//! deterministic functions of the statement and the verifier's randomness.

mod soundness;
mod toy_qr;
mod toy_table;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use soundness::{soundness_exact, soundness_by_strategy_enumeration};
pub use toy_qr::ToyQr;
pub use toy_table::{AlwaysAccept, TableSoundness, ToyTable};

use crate::oracle::Domain;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Statement {
    pub x: u64,
    /// `Some` exactly for yes-instances.
    pub witness: Option<u64>,
}

impl Statement {
    pub fn is_yes(&self) -> bool {
        self.witness.is_some()
    }
}

pub trait Protocol: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    /// `|M|`; messages in both directions are encoded in `[0, |M|)`.
    fn alphabet(&self) -> u64;
    /// Number of prover messages `k`.
    fn rounds(&self) -> usize;
    /// `|R|`.
    fn randomness(&self) -> u64;
    fn statements(&self) -> Vec<Statement>;
    /// Verifier reply `F[x, r](m_1..m_i)` for `i < k`.
    fn verifier_message(&self, x: u64, r: u64, prefix: &[u64]) -> u64;
    /// `F[x, r](m_1..m_k)`.
    fn decide(&self, x: u64, r: u64, transcript: &[u64]) -> bool;
    /// Honest prover's next message after receiving `received` verifier messages.
    fn prover_message(&self, x: u64, witness: u64, received: &[u64]) -> u64;
    /// Witness used by wrappers that must run the honest code on a no-instance.
    fn placeholder_witness(&self, x: u64) -> u64 {
        let _ = x;
        0
    }
    /// Size of the per-round challenge space if the protocol is public coin,
    /// in which case `r` is the mixed-radix tuple of the `k-1` challenges.
    fn challenge_space(&self) -> Option<u64> {
        None
    }
}

pub type ProtocolRef = Arc<dyn Protocol>;

impl dyn Protocol + '_ {
    /// `F[x, r]` on `M^{≤k}`: the reply for short prefixes, the decision bit
    /// for full transcripts.
    pub fn f_value(&self, x: u64, r: u64, point: &[u64]) -> u64 {
        if point.len() < self.rounds() {
            self.verifier_message(x, r, point)
        } else {
            self.decide(x, r, point) as u64
        }
    }

    pub fn transcript_domain(&self) -> Result<Domain> {
        Domain::prefixes(self.alphabet(), self.rounds())
    }

    pub fn challenges(&self, r: u64) -> Result<Vec<u64>> {
        let c = self.require_public_coin()?;
        let mut rest = r;
        Ok((0..self.rounds() - 1)
            .map(|_| {
                let v = rest % c;
                rest /= c;
                v
            })
            .collect())
    }

    pub fn join_challenges(&self, cs: &[u64]) -> Result<u64> {
        let c = self.require_public_coin()?;
        Ok(cs.iter().rev().fold(0, |acc, &v| acc * c + v))
    }

    pub fn require_public_coin(&self) -> Result<u64> {
        self.challenge_space().ok_or_else(|| Error::ProtocolProperty { name: self.name(), property: "public coin".into() })
    }

    /// Exhaustive structural check that declared public-coin replies are the
    /// challenges themselves, independent of statement and messages.
    pub fn check_public_coin(&self) -> Result<()> {
        let c = self.require_public_coin()?;
        let k = self.rounds();
        if c.checked_pow((k - 1) as u32) != Some(self.randomness()) || c > self.alphabet() {
            return Err(Error::ProtocolProperty { name: self.name(), property: "public coin (randomness shape)".into() });
        }
        let domain = Domain::new(self.alphabet(), 1, k.saturating_sub(1).max(1))?;
        if domain.size() * self.randomness() > 1 << 22 {
            return Err(Error::StrategySpaceTooLarge("public-coin check".into()));
        }
        for st in self.statements() {
            for r in 0..self.randomness() {
                let cs = self.challenges(r)?;
                for p in domain.points().filter(|p| p.len() < k) {
                    if self.verifier_message(st.x, r, &p) != cs[p.len() - 1] {
                        return Err(Error::ProtocolProperty { name: self.name(), property: "public coin".into() });
                    }
                }
            }
        }
        Ok(())
    }

    /// `m ∈ Acc[x, r]`.
    pub fn accepts(&self, x: u64, r: u64, transcript: &[u64]) -> bool {
        transcript.len() == self.rounds() && self.decide(x, r, transcript)
    }

    /// `m ∈ Acc*[x, r, H]`: accepted and every prefix is marked by `h`.
    pub fn accepts_marked(&self, x: u64, r: u64, transcript: &[u64], h: impl Fn(&[u64]) -> u64) -> bool {
        self.accepts(x, r, transcript) && (1..=transcript.len()).all(|l| h(&transcript[..l]) == 1)
    }

    /// Public-coin `Acc*[x, H]`: accepted with challenges `c_i = H(m_1..m_i)`.
    pub fn accepts_fiat_shamir(&self, x: u64, transcript: &[u64], h: impl Fn(&[u64]) -> u64) -> Result<bool> {
        if transcript.len() != self.rounds() {
            return Ok(false);
        }
        let cs: Vec<u64> = (1..self.rounds()).map(|l| h(&transcript[..l])).collect();
        let r = self.join_challenges(&cs)?;
        Ok(self.decide(x, r, transcript))
    }

    /// Three-round `Acc*[x, H]`: accepted under randomness `H(m_1)`.
    pub fn accepts_three_round(&self, x: u64, transcript: &[u64], h: impl Fn(u64) -> u64) -> bool {
        transcript.len() == 2 && self.decide(x, h(transcript[0]), transcript)
    }
}

/// A complete honest run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub prover: Vec<u64>,
    pub verifier: Vec<u64>,
    pub accepted: bool,
}

pub fn honest_execution(p: &dyn Protocol, x: u64, witness: u64, r: u64) -> Transcript {
    let k = p.rounds();
    let mut prover = Vec::with_capacity(k);
    let mut verifier = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k {
        prover.push(p.prover_message(x, witness, &verifier));
        if i + 1 < k {
            verifier.push(p.verifier_message(x, r, &prover));
        }
    }
    let accepted = p.decide(x, r, &prover);
    Transcript { prover, verifier, accepted }
}

/// Fraction of `r` on which the honest prover is accepted.
pub fn completeness(p: &dyn Protocol, x: u64, witness: u64) -> f64 {
    let n = p.randomness();
    (0..n).filter(|&r| honest_execution(p, x, witness, r).accepted).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_protocols_are_perfectly_complete() {
        let ps: Vec<ProtocolRef> = vec![
            Arc::new(ToyQr::new(1).unwrap()),
            Arc::new(ToyQr::new(2).unwrap()),
            Arc::new(ToyTable::three_round(TableSoundness::Half)),
            Arc::new(ToyTable::one_round(TableSoundness::Half)),
            Arc::new(AlwaysAccept::new(2, 2)),
        ];
        for p in ps {
            for st in p.statements().into_iter().filter(Statement::is_yes) {
                assert_eq!(completeness(p.as_ref(), st.x, st.witness.unwrap()), 1.0, "{}", p.name());
            }
        }
    }

    #[test]
    fn public_coin_structure() {
        let qr: ProtocolRef = Arc::new(ToyQr::new(1).unwrap());
        qr.check_public_coin().unwrap();
        let table: ProtocolRef = Arc::new(ToyTable::three_round(TableSoundness::Half));
        table.check_public_coin().unwrap();
        let one: ProtocolRef = Arc::new(ToyTable::one_round(TableSoundness::Half));
        assert!(one.check_public_coin().is_err());
    }
}
