//! State vectors over named mixed-radix registers.

mod density;
mod layout;
mod state;
mod swap;
mod unitary;

pub(crate) use unitary::unitarity_deviation;

pub use density::{trace_distance, DensityOnRegister};
pub use layout::RegisterLayout;
pub use state::{MeasureBranch, MeasureMode, StateVector};
pub use swap::{swap_test_circuit, swap_test_probability};
pub use unitary::Unitary;

pub use num_complex::Complex64 as C64;

/// Tolerance used for unitarity and density validation.
pub const UNITARY_TOL: f64 = 1e-9;

/// Squared magnitude below which an amplitude is dropped from a state.
pub const PRUNE_NORM_SQR: f64 = 1e-60;
