use nalgebra::DMatrix;
use num_rational::BigRational;

use super::family::{TwoQWiseFamily, MAX_KEYS};
use crate::oracle::to_f64;
use crate::qsim::{unitarity_deviation, Unitary, C64};
use crate::{Error, Result};

/// Largest predicate register the exact adjuster materializes as a matrix.
pub const MAX_EXACT_BITS: usize = 8;
/// Largest key register the efficient adjuster materializes as a matrix.
pub const MAX_KEY_MATRIX: u128 = 1 << 11;

/// `U′ = [[√ε, √(1-ε)], [-√(1-ε), √ε]]`, so `U′|1⟩ = √(1-ε)|0⟩ + √ε|1⟩`.
pub fn u_prime(eps: f64) -> Result<Unitary> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("adjusting unitary needs ε in (0, 1], got {eps}")));
    }
    let (s, c) = (eps.sqrt(), (1.0 - eps).sqrt());
    Unitary::new(DMatrix::from_row_slice(2, 2, &[s, c, -c, s].map(|v| C64::new(v, 0.0))))
}

/// Column `b` of `U′†`: the image of `|b⟩` as `(amplitude on 0, amplitude on 1)`.
pub fn u_prime_dagger_column(eps: f64, b: u64) -> [f64; 2] {
    let (s, c) = (eps.sqrt(), (1.0 - eps).sqrt());
    if b == 0 {
        [s, c]
    } else {
        [-c, s]
    }
}

/// The inefficient adjuster: `U′†` on each bit of the predicate register
/// that holds a prefix of the target transcript, identity elsewhere.
#[derive(Debug, Clone)]
pub struct ExactAdjuster {
    eps: f64,
    bits: usize,
    prefix_bits: Vec<usize>,
}

impl ExactAdjuster {
    /// `bits` predicate positions; `prefix_bits[i]` holds `H(m_1..m_{i+1})`.
    pub fn new(eps: &BigRational, bits: usize, prefix_bits: Vec<usize>) -> Result<Self> {
        let eps = to_f64(eps);
        u_prime(eps)?;
        if prefix_bits.iter().any(|&b| b >= bits) {
            return Err(Error::InvalidParameter("prefix bit outside the predicate register".into()));
        }
        let mut sorted = prefix_bits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != prefix_bits.len() {
            return Err(Error::InvalidParameter("prefix bits must be distinct".into()));
        }
        Ok(Self { eps, bits, prefix_bits })
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn prefix_bits(&self) -> &[usize] {
        &self.prefix_bits
    }

    /// Image of the basis table `h` (bit `j` = value at point `j`).
    pub fn column(&self, h: u64, out: &mut Vec<(u64, f64)>) {
        out.clear();
        out.push((h, 1.0));
        for &bit in &self.prefix_bits {
            let cur = std::mem::take(out);
            for (v, a) in cur {
                let col = u_prime_dagger_column(self.eps, v >> bit & 1);
                for (nb, amp) in col.iter().enumerate() {
                    if *amp != 0.0 {
                        out.push(((v & !(1 << bit)) | (nb as u64) << bit, a * amp));
                    }
                }
            }
        }
    }

    pub fn matrix(&self) -> Result<Unitary> {
        if self.bits > MAX_EXACT_BITS {
            return Err(Error::DomainTooLarge { size: 1 << self.bits, limit: 1 << MAX_EXACT_BITS });
        }
        let n = 1usize << self.bits;
        let mut m = DMatrix::zeros(n, n);
        let mut col = Vec::new();
        for h in 0..n {
            self.column(h as u64, &mut col);
            for &(row, a) in &col {
                m[(row as usize, h)] += C64::new(a, 0.0);
            }
        }
        Unitary::new(m)
    }
}

/// `Σ_H √D(H) |H⟩` over `bits` independent Bernoulli(ε) points.
pub fn sparse_superposition(eps: f64, bits: usize) -> Vec<C64> {
    (0..1u64 << bits)
        .map(|h| {
            let ones = h.count_ones() as i32;
            C64::new((eps.powi(ones) * (1.0 - eps).powi(bits as i32 - ones)).sqrt(), 0.0)
        })
        .collect()
}

/// `U_≤B`: a unitary on `[A]` whose first column is uniform over `[B]`.
pub fn u_le(a: u64, b: u64) -> Result<Unitary> {
    let amp = C64::new(1.0 / (b as f64).sqrt(), 0.0);
    let v: Vec<C64> = (0..a).map(|i| if i < b { amp } else { C64::new(0.0, 0.0) }).collect();
    Unitary::with_first_column(&v)
}

/// The efficient adjuster `U_m^(Q) = (∏ U_add,m,i)† · U_≤B^{⊗k} · (U_≤A†)^{⊗k}`
/// on the key register `(κ′, a_1..a_k)`.
#[derive(Debug, Clone)]
pub struct EfficientAdjuster {
    fam: TwoQWiseFamily,
    prefixes: Vec<u64>,
    /// `U_≤B · U_≤A†` on a single offset register.
    offset_map: Unitary,
}

impl EfficientAdjuster {
    /// `prefixes[i]` is the domain index of `(m_1..m_{i+1})`.
    pub fn new(fam: &TwoQWiseFamily, prefixes: Vec<u64>) -> Result<Self> {
        if prefixes.len() != fam.rounds() {
            return Err(Error::InvalidParameter("one prefix per round".into()));
        }
        for (i, &p) in prefixes.iter().enumerate() {
            if fam.domain().len_of(p)? != i + 1 {
                return Err(Error::InvalidParameter("prefixes must have lengths 1..k".into()));
            }
        }
        if fam.key_count() > MAX_KEYS {
            return Err(Error::DomainTooLarge { size: fam.key_count(), limit: MAX_KEYS });
        }
        let u_a = Unitary::dft(fam.a() as usize);
        let offset_map = u_a.dagger().compose(&u_le(fam.a(), fam.b())?)?;
        Ok(Self { fam: fam.clone(), prefixes, offset_map })
    }

    pub fn family(&self) -> &TwoQWiseFamily {
        &self.fam
    }

    /// Image of the basis key `(base_key, offsets)`.
    pub fn column(&self, base_key: u128, offsets: &[u64], out: &mut Vec<(Vec<u64>, C64)>) {
        out.clear();
        out.push((Vec::with_capacity(offsets.len()), C64::new(1.0, 0.0)));
        for (i, &a_i) in offsets.iter().enumerate() {
            let shift = self.fam.base().eval(base_key, self.prefixes[i]);
            let cur = std::mem::take(out);
            for (prefix, amp) in cur {
                for v in 0..self.fam.a() {
                    let m = self.offset_map.entry(v as usize, a_i as usize);
                    if m.norm_sqr() > 0.0 {
                        let mut next = prefix.clone();
                        next.push((v + self.fam.a() - shift) % self.fam.a());
                        out.push((next, amp * m));
                    }
                }
            }
        }
    }

    /// Image of the basis key `(base_key, offsets)` under the inverse adjuster.
    pub fn column_inverse(&self, base_key: u128, offsets: &[u64], out: &mut Vec<(Vec<u64>, C64)>) {
        out.clear();
        out.push((Vec::with_capacity(offsets.len()), C64::new(1.0, 0.0)));
        let a = self.fam.a();
        for (i, &a_i) in offsets.iter().enumerate() {
            let v = (a_i + self.fam.base().eval(base_key, self.prefixes[i])) % a;
            let cur = std::mem::take(out);
            for (prefix, amp) in cur {
                for w in 0..a {
                    let m = self.offset_map.entry(v as usize, w as usize).conj();
                    if m.norm_sqr() > 0.0 {
                        let mut next = prefix.clone();
                        next.push(w);
                        out.push((next, amp * m));
                    }
                }
            }
        }
    }

    pub fn matrix(&self) -> Result<Unitary> {
        let n = self.fam.key_count();
        if n > MAX_KEY_MATRIX {
            return Err(Error::DomainTooLarge { size: n, limit: MAX_KEY_MATRIX });
        }
        let mut m = DMatrix::zeros(n as usize, n as usize);
        let mut col = Vec::new();
        for key in 0..n {
            let (kb, offs) = self.fam.split_key(key);
            self.column(kb, &offs, &mut col);
            for (offs2, a) in &col {
                m[(self.fam.join_key(kb, offs2) as usize, key as usize)] += *a;
            }
        }
        Unitary::new(m)
    }

    /// Unitarity deviation of [`Self::matrix`], computed one base key at a
    /// time since the adjuster never changes it.
    pub fn deviation(&self) -> f64 {
        let a = self.fam.a();
        let block = (a as usize).pow(self.fam.rounds() as u32);
        let index = |offs: &[u64]| offs.iter().rev().fold(0usize, |acc, &v| acc * a as usize + v as usize);
        let mut col = Vec::new();
        let mut worst: f64 = 0.0;
        for kb in 0..self.fam.base().key_count() {
            let mut m = DMatrix::zeros(block, block);
            for c in 0..block {
                let (_, offs) = self.fam.split_key(c as u128 * self.fam.base().key_count() + kb);
                self.column(kb, &offs, &mut col);
                for (offs2, amp) in &col {
                    m[(index(offs2), c)] += *amp;
                }
            }
            worst = worst.max(unitarity_deviation(&m));
        }
        worst
    }

    /// Applies the adjuster to a dense vector over the key register.
    pub fn apply(&self, state: &[C64]) -> Result<Vec<C64>> {
        let n = self.fam.key_count();
        if state.len() as u128 != n {
            return Err(Error::InvalidParameter("state does not match the key register".into()));
        }
        let mut out = vec![C64::new(0.0, 0.0); state.len()];
        let mut col = Vec::new();
        for (key, &amp) in state.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let (kb, offs) = self.fam.split_key(key as u128);
            self.column(kb, &offs, &mut col);
            for (offs2, a) in &col {
                out[self.fam.join_key(kb, offs2) as usize] += amp * *a;
            }
        }
        Ok(out)
    }

    /// Keys on which every prefix of the target transcript evaluates to 1.
    pub fn target_keys(&self) -> Result<Vec<u128>> {
        let mut keys = Vec::new();
        for key in 0..self.fam.key_count() {
            let (kb, offs) = self.fam.split_key(key);
            let mut all = true;
            for &p in &self.prefixes {
                all &= self.fam.eval_parts(kb, &offs, p)?;
            }
            if all {
                keys.push(key);
            }
        }
        Ok(keys)
    }
}

/// Fidelity-based distance between two pure states given as dense vectors.
pub fn pure_distance(a: &[C64], b: &[C64]) -> f64 {
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    (1.0 - ov.norm_sqr() / (na * nb)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::oracle::ratio;
    use crate::qsim::UNITARY_TOL;

    #[test]
    fn u_prime_maps_bernoulli_state_to_one() {
        for eps in [0.1, 0.25, 0.5, 1.0] {
            let u = u_prime(eps).unwrap();
            let bern = DVector::from_vec(vec![C64::new((1.0 - eps).sqrt(), 0.0), C64::new(eps.sqrt(), 0.0)]);
            let out = u.dagger().apply(&bern);
            assert!((out[1].re - 1.0).abs() < 1e-12 && out[0].norm() < 1e-12);
        }
        assert!(u_prime(0.0).is_err());
    }

    #[test]
    fn exact_adjuster_identity_at_eps_one() {
        let adj = ExactAdjuster::new(&ratio(1, 1), 3, vec![0, 2]).unwrap();
        let m = adj.matrix().unwrap();
        assert!((m.matrix() - Unitary::identity(8).matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn exact_adjuster_one_round_two_points() {
        // H over the two points of a one-round, binary-alphabet prefix domain.
        let adj = ExactAdjuster::new(&ratio(1, 2), 2, vec![1]).unwrap();
        let psi = DVector::from_vec(sparse_superposition(0.5, 2));
        let out = adj.matrix().unwrap().apply(&psi);
        let target: Vec<C64> = (0..4).map(|h| C64::new(if h & 2 != 0 { 0.5f64.sqrt() } else { 0.0 }, 0.0)).collect();
        assert!(pure_distance(out.as_slice(), &target) < 1e-10);
    }

    #[test]
    fn efficient_adjuster_is_unitary() {
        let fam = TwoQWiseFamily::for_epsilon(2, 2, &ratio(1, 2), 1).unwrap();
        let p = vec![fam.domain().index(&[1]).unwrap(), fam.domain().index(&[1, 0]).unwrap()];
        let adj = EfficientAdjuster::new(&fam, p).unwrap();
        let u = adj.matrix().unwrap();
        assert!(crate::qsim::unitarity_deviation(u.matrix()) < UNITARY_TOL);
        assert!((adj.deviation() - crate::qsim::unitarity_deviation(u.matrix())).abs() < 1e-12);
    }

    #[test]
    fn efficient_adjuster_inverse_columns_undo_forward() {
        let fam = TwoQWiseFamily::for_epsilon(2, 2, &ratio(1, 4), 1).unwrap();
        let p = vec![fam.domain().index(&[0]).unwrap(), fam.domain().index(&[0, 1]).unwrap()];
        let adj = EfficientAdjuster::new(&fam, p).unwrap();
        let (mut fwd, mut back) = (Vec::new(), Vec::new());
        for key in [0u128, 5, 77] {
            let (kb, offs) = fam.split_key(key);
            adj.column(kb, &offs, &mut fwd);
            let mut acc: std::collections::BTreeMap<Vec<u64>, C64> = Default::default();
            for (o, a) in &fwd {
                adj.column_inverse(kb, o, &mut back);
                for (o2, b) in &back {
                    *acc.entry(o2.clone()).or_insert(C64::new(0.0, 0.0)) += a * b;
                }
            }
            for (o, v) in acc {
                let want = if o == offs { 1.0 } else { 0.0 };
                assert!((v - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn efficient_adjuster_hits_target() {
        for eps in [ratio(1, 4), ratio(1, 2)] {
            let fam = TwoQWiseFamily::for_epsilon(2, 2, &eps, 1).unwrap();
            for m in [[0u64, 0], [1, 0], [1, 1]] {
                let p1 = fam.domain().index(&m[..1]).unwrap();
                let p2 = fam.domain().index(&m).unwrap();
                let adj = EfficientAdjuster::new(&fam, vec![p1, p2]).unwrap();
                let n = fam.key_count() as usize;
                let uniform = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
                let out = adj.apply(&uniform).unwrap();
                let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-9);
                let mut target = vec![C64::new(0.0, 0.0); n];
                for k in adj.target_keys().unwrap() {
                    target[k as usize] = C64::new(1.0, 0.0);
                }
                assert!(pure_distance(&out, &target) < 1e-6);
            }
        }
    }
}
