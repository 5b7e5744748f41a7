use serde::Serialize;

use super::{Protocol, Statement};

/// How often a prover can win on a no-instance of [`ToyTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableSoundness {
    Zero,
    Half,
    One,
}

/// Lookup-table language over 2-bit statements with binary messages.
///
/// Three-round form: the prover sends `m1`, receives a challenge bit `c`
/// and must answer `m2 = m1 ⊕ c`. Yes-instances always accept a correct
/// answer; no-instances accept it only for `c = 0` (`Half`), always
/// (`One`) or never (`Zero`). The one-round form accepts `m1 = 1`, gated
/// on no-instances by a private coin in the `Half` case.
#[derive(Debug, Clone, Serialize)]
pub struct ToyTable {
    table: [bool; 4],
    k: usize,
    soundness: TableSoundness,
}

impl ToyTable {
    pub const DEFAULT_TABLE: [bool; 4] = [true, false, true, false];

    pub fn three_round(soundness: TableSoundness) -> Self {
        Self { table: Self::DEFAULT_TABLE, k: 2, soundness }
    }

    pub fn one_round(soundness: TableSoundness) -> Self {
        Self { table: Self::DEFAULT_TABLE, k: 1, soundness }
    }

    pub fn with_table(mut self, table: [bool; 4]) -> Self {
        self.table = table;
        self
    }

    fn gate(&self, x: u64, r: u64, c: u64) -> bool {
        if self.table[x as usize] {
            return true;
        }
        match self.soundness {
            TableSoundness::Zero => false,
            TableSoundness::One => true,
            TableSoundness::Half => {
                if self.k == 1 {
                    r == 0
                } else {
                    c == 0
                }
            }
        }
    }
}

impl Protocol for ToyTable {
    fn name(&self) -> String {
        format!("toy-table(k={},{:?})", self.k, self.soundness)
    }

    fn alphabet(&self) -> u64 {
        2
    }

    fn rounds(&self) -> usize {
        self.k
    }

    fn randomness(&self) -> u64 {
        2
    }

    fn statements(&self) -> Vec<Statement> {
        (0..4).map(|x| Statement { x, witness: self.table[x as usize].then_some(1) }).collect()
    }

    fn verifier_message(&self, _x: u64, r: u64, _prefix: &[u64]) -> u64 {
        r
    }

    fn decide(&self, x: u64, r: u64, t: &[u64]) -> bool {
        if self.k == 1 {
            t[0] == 1 && self.gate(x, r, 0)
        } else {
            t[1] == t[0] ^ r && self.gate(x, r, r)
        }
    }

    fn prover_message(&self, _x: u64, _w: u64, received: &[u64]) -> u64 {
        match (self.k, received.first()) {
            (1, _) => 1,
            (_, None) => 0,
            (_, Some(&c)) => c & 1,
        }
    }

    fn challenge_space(&self) -> Option<u64> {
        (self.k == 2).then_some(2)
    }
}

/// Accepts every transcript; replies are uniform challenges.
#[derive(Debug, Clone, Serialize)]
pub struct AlwaysAccept {
    alphabet: u64,
    k: usize,
}

impl AlwaysAccept {
    pub fn new(alphabet: u64, k: usize) -> Self {
        Self { alphabet, k }
    }
}

impl Protocol for AlwaysAccept {
    fn name(&self) -> String {
        format!("always-accept(|M|={},k={})", self.alphabet, self.k)
    }

    fn alphabet(&self) -> u64 {
        self.alphabet
    }

    fn rounds(&self) -> usize {
        self.k
    }

    fn randomness(&self) -> u64 {
        self.alphabet.pow(self.k as u32 - 1)
    }

    fn statements(&self) -> Vec<Statement> {
        vec![Statement { x: 0, witness: Some(0) }]
    }

    fn verifier_message(&self, _x: u64, r: u64, prefix: &[u64]) -> u64 {
        r / self.alphabet.pow(prefix.len() as u32 - 1) % self.alphabet
    }

    fn decide(&self, _x: u64, _r: u64, _t: &[u64]) -> bool {
        true
    }

    fn prover_message(&self, _x: u64, _w: u64, _received: &[u64]) -> u64 {
        0
    }

    fn challenge_space(&self) -> Option<u64> {
        (self.k >= 2).then_some(self.alphabet)
    }
}
