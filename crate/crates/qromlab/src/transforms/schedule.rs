use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::{Error, Result};

/// Cap on enumerated schedules.
pub const MAX_SCHEDULES: u128 = 1 << 20;

/// Measure the `j`-th query (0-based); reprogram before answering it when
/// `b = 0`, right after when `b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Pick {
    pub j: usize,
    pub b: u8,
}

/// One choice of `(j_i, b_i)` per target, `None` standing for `(⊥, ⊥)`.
/// No two targets share a query index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MarSchedule {
    pub q: usize,
    pub picks: Vec<Option<Pick>>,
}

impl MarSchedule {
    pub fn new(q: usize, picks: Vec<Option<Pick>>) -> Result<Self> {
        let mut seen = Vec::new();
        for p in picks.iter().flatten() {
            if p.j >= q || p.b > 1 {
                return Err(Error::InvalidParameter(format!("pick {p:?} outside [{q}]×{{0,1}}")));
            }
            if seen.contains(&p.j) {
                return Err(Error::InvalidParameter(format!("query {} picked twice", p.j)));
            }
            seen.push(p.j);
        }
        Ok(Self { q, picks })
    }

    pub fn k(&self) -> usize {
        self.picks.len()
    }

    /// Target index measuring query `j`, if any.
    pub fn target_of(&self, j: usize) -> Option<(usize, Pick)> {
        self.picks.iter().enumerate().find_map(|(i, p)| p.filter(|p| p.j == j).map(|p| (i, p)))
    }

    /// Every valid schedule, in lexicographic order.
    pub fn all(k: usize, q: usize) -> Result<Vec<Self>> {
        let count = schedule_count(k, q);
        if count > MAX_SCHEDULES {
            return Err(Error::StrategySpaceTooLarge(format!("{count} schedules")));
        }
        let options: Vec<Option<Pick>> =
            std::iter::once(None).chain((0..q).flat_map(|j| (0..2).map(move |b| Some(Pick { j, b })))).collect();
        let mut out = Vec::with_capacity(count as usize);
        let mut cur = Vec::with_capacity(k);
        fill(&options, k, &mut cur, &mut out, q);
        Ok(out)
    }
}

fn fill(options: &[Option<Pick>], k: usize, cur: &mut Vec<Option<Pick>>, out: &mut Vec<MarSchedule>, q: usize) {
    if cur.len() == k {
        out.push(MarSchedule { q, picks: cur.clone() });
        return;
    }
    for o in options {
        if let Some(p) = o {
            if cur.iter().flatten().any(|c| c.j == p.j) {
                continue;
            }
        }
        cur.push(*o);
        fill(options, k, cur, out, q);
        cur.pop();
    }
}

/// `Σ_m C(k, m) · q!/(q−m)! · 2^m`.
pub fn schedule_count(k: usize, q: usize) -> u128 {
    let mut total = 0u128;
    for m in 0..=k.min(q) {
        let choose = (0..m).fold(1u128, |acc, i| acc * (k - i) as u128 / (i + 1) as u128);
        let falling = (0..m).fold(1u128, |acc, i| acc * (q - i) as u128);
        total += (choose * falling) << m;
    }
    total
}

/// `1/(2q+1)^{2k}`.
pub fn mar_factor(k: usize, q: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2 * q as u64 + 1).pow(2 * k as u32))
}
