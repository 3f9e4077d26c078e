//! Quantum phase dynamics of a single-mode atom laser.
//!
//! The crate builds Lindblad generators for the laser mode in a truncated
//! Fock space, computes first-order coherence, coherence times, linewidths
//! and power spectra numerically, and provides the closed-form phase
//! diffusion results that serve as oracles for the numerics.

pub mod analytic;
pub mod checks;
pub mod coherence;
pub mod error;
pub mod fock;
pub mod io;
pub mod linalg;
pub mod liouvillian;
pub mod ode;
pub mod phase_space;
pub mod qnd;
pub mod quadrature;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};
