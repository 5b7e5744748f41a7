use num_rational::BigRational;

use super::Protocol;
use crate::par::{self, Parallelism};
use crate::{Error, Result};

/// Cap on decision evaluations for the exact game-tree search.
pub const MAX_EVALUATIONS: u128 = 1 << 28;
/// Cap on explicitly enumerated deterministic strategies.
pub const MAX_STRATEGIES: u128 = 1 << 20;

/// Best success probability over deterministic adaptive provers, by
/// backward induction on the game tree (prover nodes maximize, verifier
/// nodes average over the randomness consistent with the view).
pub fn soundness_exact(p: &dyn Protocol, x: u64, mode: Parallelism) -> Result<BigRational> {
    let m = p.alphabet() as u128;
    let evals = m
        .checked_pow(p.rounds() as u32)
        .and_then(|v| v.checked_mul(p.randomness() as u128))
        .unwrap_or(u128::MAX);
    if evals > MAX_EVALUATIONS {
        return Err(Error::StrategySpaceTooLarge(format!("{evals} decision evaluations")));
    }
    let rs: Vec<u64> = (0..p.randomness()).collect();
    let firsts: Vec<u64> = (0..p.alphabet()).collect();
    let counts = par::map(mode, firsts, |m1| {
        let mut msgs = vec![m1];
        after_message(p, x, &mut msgs, &rs)
    });
    let best = counts.into_iter().max().unwrap_or(0);
    Ok(BigRational::new(best.into(), p.randomness().into()))
}

/// Accepting count over `rs` for the best continuation after `msgs` was sent.
fn after_message(p: &dyn Protocol, x: u64, msgs: &mut Vec<u64>, rs: &[u64]) -> u64 {
    if msgs.len() == p.rounds() {
        return rs.iter().filter(|&&r| p.decide(x, r, msgs)).count() as u64;
    }
    let mut groups: std::collections::BTreeMap<u64, Vec<u64>> = Default::default();
    for &r in rs {
        groups.entry(p.verifier_message(x, r, msgs)).or_default().push(r);
    }
    groups
        .values()
        .map(|group| {
            (0..p.alphabet())
                .map(|m| {
                    msgs.push(m);
                    let v = after_message(p, x, msgs, group);
                    msgs.pop();
                    v
                })
                .max()
                .unwrap_or(0)
        })
        .sum()
}

/// Same value by listing every deterministic strategy: a first message and,
/// for each later round, a reply table indexed by the verifier messages seen.
/// Only for tiny protocols; used as an independent check.
pub fn soundness_by_strategy_enumeration(p: &dyn Protocol, x: u64) -> Result<BigRational> {
    let m = p.alphabet() as u128;
    let k = p.rounds();
    let c = p.challenge_space().unwrap_or(p.randomness()) as u128;
    let reply_points: Vec<u32> = (1..k).map(|i| c.saturating_pow(i as u32).min(u32::MAX as u128) as u32).collect();
    let mut decisions: u128 = 1;
    for &pts in &reply_points {
        decisions = decisions.saturating_add(pts as u128);
    }
    let strategies = u32::try_from(decisions)
        .ok()
        .and_then(|d| m.checked_pow(d))
        .unwrap_or(u128::MAX);
    if strategies > MAX_STRATEGIES {
        return Err(Error::StrategySpaceTooLarge(format!("{strategies} strategies")));
    }
    let mut best = 0u64;
    for s in 0..strategies {
        let mut digits = Vec::with_capacity(decisions as usize);
        let mut rest = s;
        for _ in 0..decisions {
            digits.push((rest % m) as u64);
            rest /= m;
        }
        let wins = (0..p.randomness())
            .filter(|&r| {
                let mut msgs = vec![digits[0]];
                let mut seen: Vec<u64> = Vec::new();
                let mut offset = 1usize;
                for i in 1..k {
                    seen.push(p.verifier_message(x, r, &msgs));
                    let view = seen.iter().rev().fold(0u64, |acc, &v| acc * c as u64 + v);
                    msgs.push(digits[offset + view as usize]);
                    offset += reply_points[i - 1] as usize;
                }
                p.decide(x, r, &msgs)
            })
            .count() as u64;
        best = best.max(wins);
    }
    Ok(BigRational::new(best.into(), p.randomness().into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ratio;
    use crate::protocol::{TableSoundness, ToyQr, ToyTable};

    #[test]
    fn game_tree_matches_strategy_enumeration() {
        let p = ToyQr::new(1).unwrap();
        for st in p.statements() {
            let a = soundness_exact(&p, st.x, Parallelism::Sequential).unwrap();
            let b = soundness_by_strategy_enumeration(&p, st.x).unwrap();
            assert_eq!(a, b, "x = {}", st.x);
            let expect = if st.is_yes() { ratio(1, 1) } else { ratio(1, 2) };
            assert_eq!(a, expect);
        }
        for s in [TableSoundness::Zero, TableSoundness::Half, TableSoundness::One] {
            let p = ToyTable::three_round(s);
            assert_eq!(
                soundness_exact(&p, 1, Parallelism::Sequential).unwrap(),
                soundness_by_strategy_enumeration(&p, 1).unwrap()
            );
        }
    }

    #[test]
    fn parallel_repetition_halves_per_round() {
        let p = ToyQr::new(2).unwrap();
        assert_eq!(soundness_exact(&p, 2, Parallelism::Parallel).unwrap(), ratio(1, 4));
        let p3 = ToyQr::new(3).unwrap();
        assert_eq!(soundness_exact(&p3, 2, Parallelism::Parallel).unwrap(), ratio(1, 8));
    }
}
