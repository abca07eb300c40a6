//! Numerical laboratory for dilute repulsive Bose gases: zero-energy
//! scattering, Gross-Pitaevskii ground states, exact few-body ground states,
//! the diffusions those densities drive, and the chaos metrics that compare
//! the two descriptions.
//!
//! Units: hbar = 2m = 1 throughout, so the one-particle operator is
//! -lap + V and the diffusions carry unit noise.

pub mod chaos;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod gp;
pub mod grid;
pub mod nbody;
pub mod ops;
pub mod scattering;

pub use error::{Error, Result};
