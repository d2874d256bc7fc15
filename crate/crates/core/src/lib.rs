//! Three cavities coupled through one qubit: a photon lattice simulator.
//!
//! The fixed-photon-number sectors of the device form a triangular lattice
//! with two orbitals per site. This crate builds the sector Hamiltonians,
//! computes spectral and topological diagnostics, propagates quantum and
//! classical dynamics, checks the Floquet drive that generates the
//! three-body coupling, and simulates the driven router with detectors.
//!
//! Energies are in units of the coupling `g` unless stated otherwise; times
//! are in units of `1/g`.

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod krylov;
pub mod lda;
pub mod linalg;
pub mod ode;
pub mod operators;
pub mod par;
pub mod router;
pub mod semiclassical;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Circulation period `T = 4π/(√3 |g|)`.
pub fn period(g: f64) -> f64 {
    4.0 * std::f64::consts::PI / (3f64.sqrt() * g.abs())
}

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
