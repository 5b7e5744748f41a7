//! Malicious verifiers as explicit step programs, black-box simulators
//! against them, and query algorithms against plain oracles.

pub mod exec;
pub mod interact;
pub mod program;
pub mod sim;
pub mod verifier;
pub mod zoo;

#[cfg(test)]
mod tests;

pub use exec::{run, Branch, Interceptor, Prepared, Reprogram, Slot, Transparent};
pub use interact::{link, run_interaction, run_simulator, Linked, SimRun};
pub use program::{invert, Query, Step};
pub use sim::{simulator_by_name, SimEnv, SimStep, Simulator, Variant};
pub use verifier::{AuxMode, AuxState, Support, VerifierKind, VerifierMachine};
pub use zoo::OracleAlgorithm;
