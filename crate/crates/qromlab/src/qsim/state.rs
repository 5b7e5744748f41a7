use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DensityOnRegister, RegisterLayout, Unitary, C64, PRUNE_NORM_SQR};
use crate::{Error, Result};

/// Amplitudes over a [`RegisterLayout`].
///
/// Storage is an ordered map from basis index to amplitude. Only the support
/// is stored, which keeps wide message registers affordable as long as the
/// state stays concentrated; iteration order is fixed, so every reduction is
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: Arc<RegisterLayout>,
    amps: BTreeMap<u128, C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    /// Every outcome with nonzero probability.
    Exhaustive,
    /// One outcome drawn with a seeded generator.
    Sampled(u64),
    /// The given outcome; errors if it has zero probability.
    Forced(u64),
}

#[derive(Debug, Clone)]
pub struct MeasureBranch {
    pub outcome: u64,
    pub probability: f64,
    pub state: StateVector,
}

impl StateVector {
    pub fn zero(layout: Arc<RegisterLayout>) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(0, C64::new(1.0, 0.0));
        Self { layout, amps }
    }

    /// Basis state with the named registers set and all others zero.
    pub fn basis(layout: Arc<RegisterLayout>, values: &[(&str, u64)]) -> Result<Self> {
        let mut digits = vec![0u64; layout.len()];
        for (name, v) in values {
            digits[layout.position(name)?] = *v;
        }
        let idx = layout.encode(&digits)?;
        let mut amps = BTreeMap::new();
        amps.insert(idx, C64::new(1.0, 0.0));
        Ok(Self { layout, amps })
    }

    pub fn empty(layout: Arc<RegisterLayout>) -> Self {
        Self { layout, amps: BTreeMap::new() }
    }

    pub fn from_entries(layout: Arc<RegisterLayout>, entries: impl IntoIterator<Item = (u128, C64)>) -> Result<Self> {
        let total = layout.total_dim();
        let mut amps = BTreeMap::new();
        for (i, a) in entries {
            if i >= total {
                return Err(Error::EncodingOverflow(format!("index {i} >= dimension {total}")));
            }
            *amps.entry(i).or_insert(C64::new(0.0, 0.0)) += a;
        }
        let mut s = Self { layout, amps };
        s.prune();
        Ok(s)
    }

    pub fn from_dense(layout: Arc<RegisterLayout>, amps: &[C64]) -> Result<Self> {
        if amps.len() as u128 != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a layout of dimension {}",
                amps.len(),
                layout.total_dim()
            )));
        }
        Self::from_entries(layout, amps.iter().enumerate().map(|(i, &a)| (i as u128, a)))
    }

    /// Product state of per-register vectors (each indexed by register value).
    pub fn product(layout: Arc<RegisterLayout>, factors: &[(&str, Vec<C64>)]) -> Result<Self> {
        let mut state = Self::zero(layout.clone());
        for (name, vec) in factors {
            let pos = layout.position(name)?;
            if vec.len() as u64 != layout.dim(pos) {
                return Err(Error::DimensionMismatch(format!("factor for `{name}` has wrong length")));
            }
            let mut next = BTreeMap::new();
            for (&idx, &a) in &state.amps {
                let base = layout.with_digit(idx, pos, 0);
                for (v, &b) in vec.iter().enumerate() {
                    let amp = a * b;
                    if amp.norm_sqr() > PRUNE_NORM_SQR {
                        next.insert(base + v as u128 * layout.stride(pos), amp);
                    }
                }
            }
            state.amps = next;
        }
        Ok(state)
    }

    pub fn layout(&self) -> &Arc<RegisterLayout> {
        &self.layout
    }

    pub fn dim(&self) -> u128 {
        self.layout.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, index: u128) -> C64 {
        self.amps.get(&index).copied().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u128, C64)> + '_ {
        self.amps.iter().map(|(&i, &a)| (i, a))
    }

    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let total = self.dim();
        if total > 1 << 24 {
            return Err(Error::DomainTooLarge { size: total, limit: 1 << 24 });
        }
        let mut v = vec![C64::new(0.0, 0.0); total as usize];
        for (&i, &a) in &self.amps {
            v[i as usize] = a;
        }
        Ok(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut s = self.clone();
        for a in s.amps.values_mut() {
            *a *= factor;
        }
        s.prune();
        s
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_layout(other)?;
        let mut s = self.clone();
        for (&i, &a) in &other.amps {
            *s.amps.entry(i).or_insert(C64::new(0.0, 0.0)) += a;
        }
        s.prune();
        Ok(s)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_layout(other)?;
        Ok(self
            .amps
            .iter()
            .filter_map(|(i, a)| other.amps.get(i).map(|b| a.conj() * b))
            .sum())
    }

    fn check_same_layout(&self, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch("states live on different layouts".into()));
        }
        Ok(())
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm_sqr() > PRUNE_NORM_SQR);
    }

    fn positions(&self, targets: &[&str]) -> Result<Vec<usize>> {
        let pos: Vec<usize> = targets.iter().map(|t| self.layout.position(t)).collect::<Result<_>>()?;
        for (i, p) in pos.iter().enumerate() {
            if pos[..i].contains(p) {
                return Err(Error::Layout(format!("register `{}` listed twice", targets[i])));
            }
        }
        Ok(pos)
    }

    /// Apply `u` to the composite of `targets` (first target least significant).
    pub fn apply_unitary(&self, targets: &[&str], u: &Unitary) -> Result<Self> {
        let pos = self.positions(targets)?;
        self.apply_unitary_at(&pos, u, None)
    }

    /// Apply `u` on `targets` only where register `control` holds `value`.
    pub fn apply_controlled(&self, control: &str, value: u64, targets: &[&str], u: &Unitary) -> Result<Self> {
        let pos = self.positions(targets)?;
        let c = self.layout.position(control)?;
        if pos.contains(&c) {
            return Err(Error::Layout("control register is also a target".into()));
        }
        self.apply_unitary_at(&pos, u, Some((c, value)))
    }

    pub(crate) fn apply_unitary_at(&self, pos: &[usize], u: &Unitary, control: Option<(usize, u64)>) -> Result<Self> {
        let sub_dims: Vec<u64> = pos.iter().map(|&p| self.layout.dim(p)).collect();
        let sub_total: u128 = sub_dims.iter().map(|&d| d as u128).product();
        if sub_total != u.dim() as u128 {
            return Err(Error::DimensionMismatch(format!(
                "unitary of size {} on registers of total dimension {sub_total}",
                u.dim()
            )));
        }
        let offsets: Vec<u128> = (0..sub_total as usize)
            .map(|row| {
                let mut r = row as u64;
                let mut off = 0u128;
                for (&p, &d) in pos.iter().zip(&sub_dims) {
                    off += (r % d) as u128 * self.layout.stride(p);
                    r /= d;
                }
                off
            })
            .collect();
        let mut out: BTreeMap<u128, C64> = BTreeMap::new();
        for (&idx, &a) in &self.amps {
            if let Some((c, v)) = control {
                if self.layout.digit(idx, c) != v {
                    *out.entry(idx).or_insert(C64::new(0.0, 0.0)) += a;
                    continue;
                }
            }
            let mut col = 0usize;
            let mut mult = 1usize;
            let mut rest = idx;
            for (&p, &d) in pos.iter().zip(&sub_dims) {
                let digit = self.layout.digit(idx, p);
                col += digit as usize * mult;
                mult *= d as usize;
                rest -= digit as u128 * self.layout.stride(p);
            }
            for (row, off) in offsets.iter().enumerate() {
                let m = u.entry(row, col);
                if m.re != 0.0 || m.im != 0.0 {
                    *out.entry(rest + off).or_insert(C64::new(0.0, 0.0)) += m * a;
                }
            }
        }
        let mut s = Self { layout: self.layout.clone(), amps: out };
        s.prune();
        Ok(s)
    }

    /// Apply a classical reversible map acting on the digit vector.
    ///
    /// Injectivity is checked on the support: two basis states landing on the
    /// same image is reported as [`Error::NotReversible`].
    pub fn apply_map<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&mut [u64]) -> Result<()>,
    {
        let mut out = BTreeMap::new();
        let mut digits = Vec::with_capacity(self.layout.len());
        for (&idx, &a) in &self.amps {
            self.layout.decode_into(idx, &mut digits);
            f(&mut digits)?;
            for (p, &v) in digits.iter().enumerate() {
                if v >= self.layout.dim(p) {
                    return Err(Error::EncodingOverflow(format!(
                        "map wrote {v} into register `{}` of dimension {}",
                        self.layout.name(p),
                        self.layout.dim(p)
                    )));
                }
            }
            let image = self.layout.encode_unchecked(&digits);
            if out.insert(image, a).is_some() {
                return Err(Error::NotReversible);
            }
        }
        Ok(Self { layout: self.layout.clone(), amps: out })
    }

    /// Apply a map that sends each basis state to a short superposition.
    ///
    /// Used for operations that are unitary overall but easiest to describe
    /// column by column; the caller is responsible for unitarity.
    pub(crate) fn apply_columns<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&[u64], &mut Vec<(Vec<u64>, C64)>) -> Result<()>,
    {
        let mut out: BTreeMap<u128, C64> = BTreeMap::new();
        let mut digits = Vec::with_capacity(self.layout.len());
        let mut col = Vec::new();
        for (&idx, &a) in &self.amps {
            self.layout.decode_into(idx, &mut digits);
            col.clear();
            f(&digits, &mut col)?;
            for (img, m) in &col {
                let i = self.layout.encode(img)?;
                *out.entry(i).or_insert(C64::new(0.0, 0.0)) += m * a;
            }
        }
        let mut s = Self { layout: self.layout.clone(), amps: out };
        s.prune();
        Ok(s)
    }

    /// Unnormalized projection onto `register == value`.
    pub fn project(&self, register: &str, value: u64) -> Result<Self> {
        let p = self.layout.position(register)?;
        Ok(self.project_at(p, value))
    }

    pub(crate) fn project_at(&self, pos: usize, value: u64) -> Self {
        let amps = self
            .amps
            .iter()
            .filter(|(&i, _)| self.layout.digit(i, pos) == value)
            .map(|(&i, &a)| (i, a))
            .collect();
        Self { layout: self.layout.clone(), amps }
    }

    /// Keep only basis states satisfying `pred` on their digits.
    pub fn project_where<F: Fn(&[u64]) -> bool>(&self, pred: F) -> Self {
        let mut digits = Vec::with_capacity(self.layout.len());
        let mut amps = BTreeMap::new();
        for (&i, &a) in &self.amps {
            self.layout.decode_into(i, &mut digits);
            if pred(&digits) {
                amps.insert(i, a);
            }
        }
        Self { layout: self.layout.clone(), amps }
    }

    /// Unnormalized weight of each value of `register`.
    pub fn register_weights(&self, register: &str) -> Result<BTreeMap<u64, f64>> {
        let p = self.layout.position(register)?;
        Ok(self.register_weights_at(p))
    }

    pub(crate) fn register_weights_at(&self, pos: usize) -> BTreeMap<u64, f64> {
        let mut w = BTreeMap::new();
        for (&i, a) in &self.amps {
            *w.entry(self.layout.digit(i, pos)).or_insert(0.0) += a.norm_sqr();
        }
        w
    }

    /// Measure `register` in the computational basis.
    ///
    /// Probabilities are relative to the state's norm; post-measurement
    /// states are normalized.
    pub fn measure_register(&self, register: &str, mode: MeasureMode) -> Result<Vec<MeasureBranch>> {
        let p = self.layout.position(register)?;
        let total = self.norm_sqr();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("cannot measure the zero vector".into()));
        }
        let weights = self.register_weights_at(p);
        let branch = |outcome: u64, w: f64| -> Result<MeasureBranch> {
            let state = self.project_at(p, outcome).normalized()?;
            Ok(MeasureBranch { outcome, probability: w / total, state })
        };
        match mode {
            MeasureMode::Exhaustive => weights.into_iter().map(|(o, w)| branch(o, w)).collect(),
            MeasureMode::Forced(o) => match weights.get(&o) {
                Some(&w) if w > 0.0 => Ok(vec![branch(o, w)?]),
                _ => Err(Error::ZeroProbabilityOutcome { register: register.to_string(), outcome: o }),
            },
            MeasureMode::Sampled(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut u: f64 = rng.gen::<f64>() * total;
                let last = *weights.keys().next_back().expect("nonzero state has support");
                for (&o, &w) in &weights {
                    if u < w || o == last {
                        return Ok(vec![branch(o, w)?]);
                    }
                    u -= w;
                }
                unreachable!("sampling always returns")
            }
        }
    }

    /// Reduced density matrix on `keep` (composite, first register least
    /// significant), normalized to unit trace.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOnRegister> {
        let pos = self.positions(keep)?;
        let dims: Vec<u64> = pos.iter().map(|&p| self.layout.dim(p)).collect();
        let d: u128 = dims.iter().map(|&x| x as u128).product();
        if d > 1 << 12 {
            return Err(Error::DomainTooLarge { size: d, limit: 1 << 12 });
        }
        let total = self.norm_sqr();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("cannot trace the zero vector".into()));
        }
        let mut groups: BTreeMap<u128, Vec<(usize, C64)>> = BTreeMap::new();
        for (&idx, &a) in &self.amps {
            let mut sub = 0usize;
            let mut mult = 1usize;
            let mut rest = idx;
            for (&p, &dim) in pos.iter().zip(&dims) {
                let digit = self.layout.digit(idx, p);
                sub += digit as usize * mult;
                mult *= dim as usize;
                rest -= digit as u128 * self.layout.stride(p);
            }
            groups.entry(rest).or_default().push((sub, a));
        }
        let d = d as usize;
        let mut m = nalgebra::DMatrix::<C64>::zeros(d, d);
        for entries in groups.values() {
            for &(i, a) in entries {
                for &(j, b) in entries {
                    m[(i, j)] += a * b.conj();
                }
            }
        }
        m /= C64::new(total, 0.0);
        DensityOnRegister::new(keep.iter().map(|s| s.to_string()).collect(), m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> Arc<RegisterLayout> {
        RegisterLayout::new(&[("a", 2), ("b", 3)]).unwrap().shared()
    }

    #[test]
    fn hadamard_then_measure() {
        let s = StateVector::zero(layout()).apply_unitary(&["a"], &Unitary::hadamard()).unwrap();
        let br = s.measure_register("a", MeasureMode::Exhaustive).unwrap();
        assert_eq!(br.len(), 2);
        for b in &br {
            assert!((b.probability - 0.5).abs() < 1e-12);
            assert!((b.state.norm_sqr() - 1.0).abs() < 1e-12);
        }
        let forced = StateVector::zero(layout()).measure_register("a", MeasureMode::Forced(1));
        assert!(matches!(forced, Err(Error::ZeroProbabilityOutcome { .. })));
    }

    #[test]
    fn sampled_measurement_is_reproducible() {
        let s = StateVector::zero(layout()).apply_unitary(&["b"], &Unitary::dft(3)).unwrap();
        let a = s.measure_register("b", MeasureMode::Sampled(7)).unwrap();
        let b = s.measure_register("b", MeasureMode::Sampled(7)).unwrap();
        assert_eq!(a[0].outcome, b[0].outcome);
    }

    #[test]
    fn controlled_gate_only_fires_on_value() {
        let s = StateVector::basis(layout(), &[("b", 2)]).unwrap();
        let t = s.apply_controlled("b", 1, &["a"], &Unitary::pauli_x()).unwrap();
        assert_eq!(t, s);
        let u = s.apply_controlled("b", 2, &["a"], &Unitary::pauli_x()).unwrap();
        assert_eq!(u.layout().decode(u.entries().next().unwrap().0), vec![1, 2]);
    }

    #[test]
    fn non_injective_map_is_rejected() {
        let s = StateVector::zero(layout()).apply_unitary(&["a"], &Unitary::hadamard()).unwrap();
        assert!(matches!(s.apply_map(|d| { d[0] = 0; Ok(()) }), Err(Error::NotReversible)));
    }

    #[test]
    fn composite_target_matches_kron() {
        let l = layout();
        let u = Unitary::hadamard().kron_low(&Unitary::dft(3));
        let s = StateVector::zero(l.clone()).apply_unitary(&["a", "b"], &u).unwrap();
        let t = StateVector::zero(l)
            .apply_unitary(&["a"], &Unitary::hadamard())
            .unwrap()
            .apply_unitary(&["b"], &Unitary::dft(3))
            .unwrap();
        assert!((s.inner(&t).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn unitaries_preserve_norm(angle in 0.0f64..6.3, v in 0u64..3) {
            let c = angle.cos();
            let s = angle.sin();
            let m = nalgebra::DMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(0.0, s), C64::new(0.0, s), C64::new(c, 0.0)]);
            let u = Unitary::new(m).unwrap();
            let st = StateVector::basis(layout(), &[("b", v)]).unwrap()
                .apply_unitary(&["a"], &Unitary::hadamard()).unwrap()
                .apply_unitary(&["a"], &u).unwrap()
                .apply_unitary(&["b"], &Unitary::dft(3)).unwrap();
            prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
            let rho = st.partial_trace(&["a"]).unwrap();
            prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }
}
