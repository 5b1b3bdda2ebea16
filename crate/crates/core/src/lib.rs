//! Decay verification for linear Fokker-Planck equations
//! `∂f/∂t = div(D∇f + Cxf)` with a Gaussian equilibrium.
//!
//! Modules follow the pipeline: [`matrix`] validates and normalizes the
//! system, [`propagator`] evolves Gaussian mixtures and Hermite expansions
//! exactly, [`functionals`] evaluates entropies and Fisher informations by
//! Gauss-Hermite quadrature, [`spectral`] checks the generator blocks,
//! [`verifier`] runs trajectories against the explicit bounds and
//! [`nonquadratic`] covers scalar diffusions with general potentials.

// Guards like `!(x > 0.0)` are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functionals;
pub mod matrix;
pub mod nonquadratic;
pub mod parallel;
pub mod propagator;
pub mod spectral;
pub mod verifier;

pub use error::{Error, Result};
