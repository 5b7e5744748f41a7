use nalgebra::{DMatrix, DVector};

use super::{C64, UNITARY_TOL};
use crate::{Error, Result};

/// A square matrix checked to be unitary on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    matrix: DMatrix<C64>,
}

impl Unitary {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "unitary must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    /// `max |(U†U − I)_{rc}|`.
    pub fn deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn hadamard() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { matrix: DMatrix::from_row_slice(2, 2, &[s, s, s, -s]) }
    }

    pub fn pauli_x() -> Self {
        Self::from_permutation(&[1, 0]).expect("valid permutation")
    }

    /// Discrete Fourier transform on `dim` levels; maps |0> to the uniform state.
    pub fn dft(dim: usize) -> Self {
        let norm = 1.0 / (dim as f64).sqrt();
        let matrix = DMatrix::from_fn(dim, dim, |r, c| {
            let angle = 2.0 * std::f64::consts::PI * ((r * c) % dim) as f64 / dim as f64;
            C64::from_polar(norm, angle)
        });
        Self { matrix }
    }

    /// Column `c` is the basis vector `perm[c]`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        let mut matrix = DMatrix::zeros(n, n);
        for (c, &r) in perm.iter().enumerate() {
            if r >= n || seen[r] {
                return Err(Error::NotReversible);
            }
            seen[r] = true;
            matrix[(r, c)] = C64::new(1.0, 0.0);
        }
        Ok(Self { matrix })
    }

    /// A unitary whose first column is the unit vector `v`, completed by a
    /// Householder reflection.
    pub fn with_first_column(v: &[C64]) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty column".into()));
        }
        let v = DVector::from_column_slice(v);
        let norm = v.norm();
        if (norm - 1.0).abs() > UNITARY_TOL {
            return Err(Error::InvalidParameter(format!("column has norm {norm}, expected 1")));
        }
        // Rotate the phase of e_0 onto v_0 so the reflection vector is well conditioned.
        let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { C64::new(1.0, 0.0) };
        let mut e0 = DVector::zeros(n);
        e0[0] = phase;
        let w = &e0 - &v;
        let wn = w.norm();
        let householder = if wn < 1e-14 {
            DMatrix::identity(n, n)
        } else {
            let w = w / C64::new(wn, 0.0);
            DMatrix::identity(n, n) - (&w * w.adjoint()) * C64::new(2.0, 0.0)
        };
        // The reflection maps e0 * phase to v; undo the phase on the first column only.
        let mut matrix = householder;
        let col0 = matrix.column(0) * phase;
        matrix.set_column(0, &col0);
        Self::new(matrix)
    }

    pub fn dagger(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, then: &Unitary) -> Result<Self> {
        if self.dim() != then.dim() {
            return Err(Error::DimensionMismatch("compose of unequal sizes".into()));
        }
        Ok(Self { matrix: &then.matrix * &self.matrix })
    }

    /// `self ⊗ other` where `self` acts on the less significant digit.
    pub fn kron_low(&self, other: &Unitary) -> Self {
        Self { matrix: other.matrix.kronecker(&self.matrix) }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }
}

pub(crate) fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let prod = m.adjoint() * m;
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((prod[(r, c)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_unitary() {
        let m = DMatrix::from_element(2, 2, C64::new(1.0, 0.0));
        assert!(matches!(Unitary::new(m), Err(Error::NotUnitary(_))));
        assert!(Unitary::from_permutation(&[0, 0]).is_err());
    }

    #[test]
    fn dft_maps_zero_to_uniform() {
        let u = Unitary::dft(5);
        for r in 0..5 {
            assert!((u.entry(r, 0) - C64::new(1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn householder_completion(re in prop::collection::vec(-1.0f64..1.0, 1..6), im in prop::collection::vec(-1.0f64..1.0, 6)) {
            let mut v: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            for z in &mut v { *z /= n; }
            let u = Unitary::with_first_column(&v).unwrap();
            for (r, z) in v.iter().enumerate() {
                prop_assert!((u.entry(r, 0) - z).norm() < 1e-10);
            }
        }
    }
}
