//! Option pricing by variational imaginary-time evolution on a simulated
//! statevector.
//!
//! The pipeline: build a Hamiltonian on a price grid ([`hamiltonian`]), fit
//! initial ansatz parameters to the payoff ([`calibration`]), evolve them
//! ([`varqite`]) and rescale the final state back to prices ([`oracle`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod oracle;
pub mod statevector;
pub mod varqite;

pub use ansatz::AnsatzCircuit;
pub use error::{Error, Result};
pub use statevector::{Qubit, StateVector};
