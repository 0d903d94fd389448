//! Numerical laboratory for the stochastically forced magnetostrophic MHD
//! system on the 3-torus and its active-scalar limit.
//!
//! Fields are real, mean-zero and represented by Hermitian Fourier coefficients
//! under a two-thirds dealiasing mask. The crate provides the constitutive
//! symbols of the limit, integrators for the full and limit dynamics, the
//! Hörmander bracket calculus for the forcing, Wasserstein-type metrics and the
//! diagnostics used to check convergence and moment estimates.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hormander;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod spectral;

pub use error::{Error, Result};
