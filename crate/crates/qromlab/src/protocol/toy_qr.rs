use serde::Serialize;

use super::{Protocol, Statement};
use crate::{Error, Result};

pub const MODULUS: u64 = 21;
/// `Z_21^*` in increasing order; message symbols index into this list.
pub const UNITS: [u64; 12] = [1, 2, 4, 5, 8, 10, 11, 13, 16, 17, 19, 20];

/// Quadratic-residuosity proof mod 21 with `t` parallel repetitions.
///
/// A prover message is a `t`-tuple of units, encoded mixed-radix over
/// [`UNITS`] indices. The challenge is a `t`-bit string, sent as the message
/// whose index equals the string. The prover's coins `u` are fixed per
/// instance.
#[derive(Debug, Clone, Serialize)]
pub struct ToyQr {
    t: u32,
    coins: Vec<u64>,
}

impl ToyQr {
    pub fn new(t: u32) -> Result<Self> {
        Self::with_coins(t, vec![2; t as usize])
    }

    pub fn with_coins(t: u32, coins: Vec<u64>) -> Result<Self> {
        if !(1..=4).contains(&t) {
            return Err(Error::InvalidParameter(format!("toy-qr supports 1..=4 repetitions, got {t}")));
        }
        if coins.len() != t as usize || coins.iter().any(|u| !UNITS.contains(u)) {
            return Err(Error::InvalidParameter("coins must be t units mod 21".into()));
        }
        Ok(Self { t, coins })
    }

    pub fn repetitions(&self) -> u32 {
        self.t
    }

    pub fn encode(&self, units: &[u64]) -> Result<u64> {
        let mut idx = 0;
        for &u in units.iter().rev() {
            let pos = UNITS.iter().position(|&v| v == u).ok_or_else(|| {
                Error::InvalidParameter(format!("{u} is not a unit mod 21"))
            })?;
            idx = idx * 12 + pos as u64;
        }
        Ok(idx)
    }

    pub fn decode(&self, m: u64) -> Vec<u64> {
        let mut rest = m;
        (0..self.t)
            .map(|_| {
                let v = UNITS[(rest % 12) as usize];
                rest /= 12;
                v
            })
            .collect()
    }

    fn bits(&self, c: u64) -> Vec<u64> {
        (0..self.t).map(|j| (c >> j) & 1).collect()
    }
}

pub fn square_root(x: u64) -> Option<u64> {
    UNITS.iter().copied().find(|&w| w * w % MODULUS == x % MODULUS)
}

impl Protocol for ToyQr {
    fn name(&self) -> String {
        format!("toy-qr(t={})", self.t)
    }

    fn alphabet(&self) -> u64 {
        12u64.pow(self.t)
    }

    fn rounds(&self) -> usize {
        2
    }

    fn randomness(&self) -> u64 {
        1 << self.t
    }

    fn statements(&self) -> Vec<Statement> {
        UNITS.iter().map(|&x| Statement { x, witness: square_root(x) }).collect()
    }

    fn verifier_message(&self, _x: u64, r: u64, _prefix: &[u64]) -> u64 {
        r
    }

    fn decide(&self, x: u64, r: u64, transcript: &[u64]) -> bool {
        let a = self.decode(transcript[0]);
        let z = self.decode(transcript[1]);
        self.bits(r)
            .iter()
            .zip(a.iter().zip(&z))
            .all(|(&c, (&a, &z))| {
                let rhs = if c == 1 { a * x % MODULUS } else { a };
                z * z % MODULUS == rhs
            })
    }

    fn prover_message(&self, _x: u64, w: u64, received: &[u64]) -> u64 {
        let units: Vec<u64> = match received.first() {
            None => self.coins.iter().map(|u| u * u % MODULUS).collect(),
            Some(&c) => {
                let c = c % (1 << self.t);
                self.coins
                    .iter()
                    .zip(self.bits(c))
                    .map(|(&u, b)| if b == 1 { u * w % MODULUS } else { u })
                    .collect()
            }
        };
        self.encode(&units).expect("products of units are units")
    }

    fn placeholder_witness(&self, _x: u64) -> u64 {
        1
    }

    fn challenge_space(&self) -> Option<u64> {
        Some(1 << self.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residues_mod_21() {
        let yes: Vec<u64> = UNITS.iter().copied().filter(|&x| square_root(x).is_some()).collect();
        assert_eq!(yes, vec![1, 4, 16]);
    }

    #[test]
    fn encoding_roundtrip() {
        let p = ToyQr::new(3).unwrap();
        for m in [0, 1, 500, 1727] {
            assert_eq!(p.encode(&p.decode(m)).unwrap(), m);
        }
        assert!(p.encode(&[3, 1, 1]).is_err());
    }

    #[test]
    fn non_residue_cannot_answer_both_challenges() {
        let p = ToyQr::new(1).unwrap();
        for st in p.statements().into_iter().filter(|s| !s.is_yes()) {
            for m1 in 0..12 {
                let answerable = (0..2).filter(|&c| (0..12).any(|m2| p.decide(st.x, c, &[m1, m2]))).count();
                assert!(answerable <= 1);
            }
        }
    }
}
