//! Matrix machinery for the pair (D, C): validation, equilibrium covariance,
//! normalization, drift spectrum and hypocoercivity certificates.

mod certificate;
mod expm;
mod lyapunov;
mod spectrum;
mod system;

pub use certificate::{build_certificate, Certificate};
pub use expm::matrix_exponential;
pub use lyapunov::{solve_lyapunov, solve_stein_like};
pub use spectrum::{analyze_drift_spectrum, EigenCluster, SpectralData};
pub use system::{normalize_system, validate_system, ConditionReport, FPSystem, NormalizedSystem};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative tolerance for rank and definiteness decisions.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Numerical rank: number of singular values above `tol * scale`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

pub(crate) fn numerical_rank_c(m: &DMatrix<Complex64>, threshold: f64) -> usize {
    m.singular_values().iter().filter(|&&s| s > threshold).count()
}

/// Symmetric part (A + A^T)/2.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let s = symmetric_part(m);
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub(crate) fn ensure_square(m: &DMatrix<f64>, name: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension(format!("{name} is empty")));
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} has non-finite entries")))
    }
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Symmetric positive definite square root.
pub fn spd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetric_part(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}
