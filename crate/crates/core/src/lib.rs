//! Spectral homogenisation kernels for evolutionary wave, heat and
//! thermoelastic equations with periodic coefficients.
//!
//! Everything here is `no_std` + `alloc`: grids and Fourier pairs on the
//! periodic cell, corrector cell problems and homogenised tensors, single
//! fibre solves with their reference states, space-time solves on a periodic
//! box in the Laplace-frequency domain, and the convergence-study machinery
//! that fits rates against the period ε.
//!
//! IO, file formats and the command-line driver live in the `homoglab` crate.

#![no_std]

extern crate alloc;

pub mod cell;
pub mod check;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod fft;
pub mod fibre;
pub mod krylov;
pub mod norms;
mod operator;
pub mod small;
pub mod study;
pub mod torus;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Convenience constructor for complex literals.
#[inline]
pub const fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
