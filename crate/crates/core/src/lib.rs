//! Stabilizability certificates for discrete-time switched linear systems
//! whose subsystems are all unstable and whose switching is restricted by a
//! switch digraph and minimum/maximum dwell times.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense real matrices, spectral norm/radius, Schur test.
//! - [`system`]: subsystem family, dwell bounds, switch graph, path enumeration.
//! - [`certificate`]: stable combinations, commutator bounds, the integer
//!   exponent quantities and the scalar stabilizability inequalities, plus the
//!   certificate search.
//! - [`signal`]: admissible switching signals built from a certificate.
//! - [`verify`]: simulation, prefix-product norms and decay-envelope checks.
//! - [`io`]: problem files, reports, CSV output and the end-to-end pipeline.

pub mod certificate;
pub mod error;
pub mod io;
pub mod linalg;
pub mod signal;
pub mod system;
pub mod verify;

#[cfg(test)]
mod fixtures;

pub use error::{Error, Result};
pub use linalg::Matrix;
