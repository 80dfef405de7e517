//! Anharmonic Lipkin–Meshkov–Glick model: exact spectra in the symmetric
//! multiplet, the classical limit, quench work statistics and their
//! finite-size analysis.

pub mod analysis;
pub mod classical;
pub mod eigensolve;
pub mod error;
pub mod fit;
pub mod spinmodel;
pub mod workstats;

pub use error::{AlmgError, Result};
