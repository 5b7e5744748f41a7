use nalgebra::DMatrix;

use super::{C64, UNITARY_TOL};
use crate::{Error, Result};

/// A density matrix on one or more registers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOnRegister {
    registers: Vec<String>,
    matrix: DMatrix<C64>,
}

impl DensityOnRegister {
    /// Validates Hermiticity and unit trace.
    pub fn new(registers: Vec<String>, matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity("not square".into()));
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > UNITARY_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > UNITARY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        Ok(Self { registers, matrix })
    }

    pub fn from_pure(register: &str, amps: &[C64]) -> Result<Self> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n <= 0.0 {
            return Err(Error::InvalidDensity("zero vector".into()));
        }
        let v = nalgebra::DVector::from_column_slice(amps) / C64::new(n.sqrt(), 0.0);
        Self::new(vec![register.to_string()], &v * v.adjoint())
    }

    /// Convex combination; weights are renormalized.
    pub fn mixture(parts: &[(f64, DensityOnRegister)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        let first = parts.first().ok_or_else(|| Error::InvalidDensity("empty mixture".into()))?;
        let mut m = DMatrix::zeros(first.1.dim(), first.1.dim());
        for (w, d) in parts {
            if d.dim() != first.1.dim() {
                return Err(Error::DimensionMismatch("mixture of unequal sizes".into()));
            }
            m += d.matrix() * C64::new(*w / total, 0.0);
        }
        Self::new(first.1.registers.clone(), m)
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr(self * other)`.
    pub fn overlap(&self, other: &DensityOnRegister) -> f64 {
        (&self.matrix * &other.matrix).trace().re
    }

    pub fn purity(&self) -> f64 {
        self.overlap(self)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }
}

/// `½ Σ |λ_i(a − b)|`.
pub fn trace_distance(a: &DensityOnRegister, b: &DensityOnRegister) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("trace distance of unequal sizes".into()));
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn zero_vs_plus() {
        let z = DensityOnRegister::from_pure("q", &[c(1.0), c(0.0)]).unwrap();
        let p = DensityOnRegister::from_pure("q", &[c(1.0), c(1.0)]).unwrap();
        assert!((trace_distance(&z, &p).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(trace_distance(&z, &z).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(0.0)]);
        assert!(DensityOnRegister::new(vec!["q".into()], m).is_err());
    }

    // Pure states: TD = sqrt(1 - |<a|b>|^2), computed without an eigensolver.
    proptest! {
        #[test]
        fn pure_state_trace_distance(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6)) {
            let va: Vec<C64> = a.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
            let vb: Vec<C64> = b.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
            let na: f64 = va.iter().map(|z| z.norm_sqr()).sum();
            let nb: f64 = vb.iter().map(|z| z.norm_sqr()).sum();
            prop_assume!(na > 1e-2 && nb > 1e-2);
            let da = DensityOnRegister::from_pure("q", &va).unwrap();
            let db = DensityOnRegister::from_pure("q", &vb).unwrap();
            let ov: C64 = va.iter().zip(&vb).map(|(x, y)| x.conj() * y).sum();
            let expect = (1.0 - ov.norm_sqr() / (na * nb)).max(0.0).sqrt();
            let td = trace_distance(&da, &db).unwrap();
            prop_assert!((td - expect).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&td));
            prop_assert!((trace_distance(&db, &da).unwrap() - td).abs() < 1e-12);
        }
    }
}
