use std::sync::Arc;

use nalgebra::SymmetricEigen;

use super::{DensityOnRegister, RegisterLayout, StateVector, Unitary, C64};
use crate::{Error, Result};

/// Acceptance probability of the SWAP test, `(1 + Tr ρσ) / 2`.
pub fn swap_test_probability(rho: &DensityOnRegister, sigma: &DensityOnRegister) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch("swap test on unequal sizes".into()));
    }
    Ok((1.0 + rho.overlap(sigma)) / 2.0)
}

/// Runs the SWAP-test circuit on purifications of `rho` and `sigma` and
/// returns the probability that the ancilla reads 0.
pub fn swap_test_circuit(rho: &DensityOnRegister, sigma: &DensityOnRegister) -> Result<f64> {
    let d = rho.dim();
    if d != sigma.dim() {
        return Err(Error::DimensionMismatch("swap test on unequal sizes".into()));
    }
    let layout: Arc<RegisterLayout> =
        RegisterLayout::new(&[("anc", 2), ("a", d as u64), ("a_ref", d as u64), ("b", d as u64), ("b_ref", d as u64)])?
            .shared();
    let pa = purification(rho);
    let pb = purification(sigma);
    let mut entries = Vec::new();
    for (ia, &x) in pa.iter().enumerate() {
        for (ib, &y) in pb.iter().enumerate() {
            let amp = x * y;
            if amp.norm_sqr() > 0.0 {
                let (a, ar) = ((ia % d) as u64, (ia / d) as u64);
                let (b, br) = ((ib % d) as u64, (ib / d) as u64);
                entries.push((layout.encode(&[0, a, ar, b, br])?, amp));
            }
        }
    }
    let state = StateVector::from_entries(layout, entries)?;
    let state = state.apply_unitary(&["anc"], &Unitary::hadamard())?;
    let state = state.apply_map(|dg| {
        if dg[0] == 1 {
            dg.swap(1, 3);
        }
        Ok(())
    })?;
    let state = state.apply_unitary(&["anc"], &Unitary::hadamard())?;
    let w = state.register_weights("anc")?;
    Ok(w.get(&0).copied().unwrap_or(0.0) / state.norm_sqr())
}

/// `Σ_i √λ_i |e_i⟩|i⟩`, indexed as `sys + d * ref`.
fn purification(rho: &DensityOnRegister) -> Vec<C64> {
    let d = rho.dim();
    let eig = SymmetricEigen::new(rho.matrix().clone());
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        let lambda = eig.eigenvalues[i].max(0.0);
        for s in 0..d {
            out[s + d * i] = eig.eigenvectors[(s, i)] * lambda.sqrt();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pure_states_always_pass() {
        let p = DensityOnRegister::from_pure("q", &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        assert!((swap_test_probability(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!((swap_test_circuit(&p, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_states_pass_half_the_time() {
        let a = DensityOnRegister::from_pure("q", &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let b = DensityOnRegister::from_pure("q", &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!((swap_test_circuit(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }
}
