//! Exact, desk-scale simulation of quantum query algorithms against sparse
//! random oracles, and of the black-box simulation reductions built on them.
//!
//! Everything is computed by exhaustive enumeration: oracle tables and keys
//! carry exact rational weights, quantum branches carry amplitudes, and the
//! two are only combined when a probability is read out.

pub mod adversary;
pub mod error;
pub mod hashfam;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod protocol;
pub mod qsim;
pub mod transforms;

pub use error::{Error, Result};
