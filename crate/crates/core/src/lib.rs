//! Coupled dynamics of thin dielectric rods, disks and spheres in a driven
//! standing-wave cavity mode.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] physical inputs and derived coupling constants,
//! * [`rotor`] orientation handling and the finite-size shape functions,
//! * [`special`] Bessel functions and sinc-type kernels,
//! * [`optics`] optical potential, Rayleigh scattering amplitudes and the
//!   sphere quadrature used to integrate over scattering directions,
//! * [`dynamics`] the classical particle-cavity equations of motion,
//! * [`cooling`] phase-space contraction, trap frequencies and recoil limits,
//! * [`ensemble`] Monte Carlo capture statistics,
//! * [`config`] and [`output`] for the command line front end.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod cooling;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod optics;
pub mod output;
pub mod params;
pub mod rotor;
pub mod special;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub use num_complex::Complex64;

#[cfg(test)]
mod testing;
