use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    analyze_drift_spectrum, ensure_finite, ensure_square, min_sym_eigenvalue, solve_stein_like,
    spectral_norm, sym_eigenvalues, symmetric_part, to_complex, SpectralData,
};
use crate::error::{Error, Result};

/// Positive definite `P` with `C^T P + P C >= 2 lambda P`.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub p: DMatrix<f64>,
    pub lambda: f64,
    pub nu: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Smallest eigenvalue of `C^T P + P C - 2 lambda P`.
    pub lmi_residual: f64,
    /// How `P` was obtained: `identity`, `eigenvector` or `shifted-lyapunov`.
    pub construction: &'static str,
}

impl Certificate {
    fn assemble(
        c: &DMatrix<f64>,
        p: DMatrix<f64>,
        lambda: f64,
        nu: f64,
        construction: &'static str,
    ) -> Self {
        let p = symmetric_part(&p);
        let ev = sym_eigenvalues(&p);
        let lmi_residual = lmi_residual(c, &p, lambda);
        Certificate {
            lambda,
            nu,
            p_min: ev[0],
            p_max: ev[ev.len() - 1],
            lmi_residual,
            construction,
            p,
        }
    }

    /// Residual acceptance: `lmi_residual >= -tolerance * ||P||`.
    pub fn is_valid(&self, tolerance: f64) -> bool {
        self.p_min > 0.0 && self.lmi_residual >= -tolerance * self.p_max
    }

    /// P rescaled so that `p_max = 1`.
    pub fn normalized(&self) -> Certificate {
        let s = 1.0 / self.p_max;
        Certificate {
            p: &self.p * s,
            p_min: self.p_min * s,
            p_max: 1.0,
            lmi_residual: self.lmi_residual * s,
            ..self.clone()
        }
    }
}

/// Smallest eigenvalue of `C^T P + P C - 2 lambda P`.
pub fn lmi_residual(c: &DMatrix<f64>, p: &DMatrix<f64>, lambda: f64) -> f64 {
    min_sym_eigenvalue(&(c.transpose() * p + p * c - p * (2.0 * lambda)))
}

/// Builds a certificate with rate `lambda = mu - nu`.
///
/// `nu > 0` solves `A^T P + P A = I` with `A = C - lambda I`. `nu = 0` uses
/// `P = I` when it already works and otherwise the eigenvector construction,
/// which needs every eigenvalue on the gap to be non-defective.
pub fn build_certificate(c: &DMatrix<f64>, nu: f64, tolerance: f64) -> Result<Certificate> {
    let d = ensure_square(c, "C")?;
    ensure_finite(c, "C")?;
    if !nu.is_finite() || nu < 0.0 {
        return Err(Error::Parameter(format!("nu = {nu} must be finite and >= 0")));
    }
    let spec = analyze_drift_spectrum(c, tolerance)?;
    if spec.mu <= tolerance {
        return Err(Error::Precondition(format!(
            "C is not positive stable (mu = {})",
            spec.mu
        )));
    }
    if nu >= spec.mu {
        return Err(Error::Parameter(format!(
            "nu = {nu} must be below the spectral gap mu = {}",
            spec.mu
        )));
    }
    let lambda = spec.mu - nu;
    let scale = spectral_norm(c).max(1.0);

    let cert = if nu > 0.0 {
        let a = c - DMatrix::identity(d, d) * lambda;
        let p = solve_stein_like(&a.transpose(), &DMatrix::identity(d, d))?;
        Certificate::assemble(c, p, lambda, nu, "shifted-lyapunov")
    } else {
        let identity = Certificate::assemble(c, DMatrix::identity(d, d), lambda, nu, "identity");
        if identity.lmi_residual >= -tolerance * scale {
            identity
        } else {
            if spec.n > 0 {
                return Err(Error::InfeasibleCertificate(format!(
                    "nu = 0 requires non-defective eigenvalues on Re = mu, found defect n = {}",
                    spec.n
                )));
            }
            let p = eigenvector_certificate(c, &spec)?;
            Certificate::assemble(c, p, lambda, nu, "eigenvector")
        }
    };
    if !cert.is_valid(tolerance.max(1e-9) * scale) {
        return Err(Error::InfeasibleCertificate(format!(
            "construction `{}` gave p_min = {:.3e}, LMI residual {:.3e}",
            cert.construction, cert.p_min, cert.lmi_residual
        )));
    }
    Ok(cert)
}

/// `P = S S^* + U H U^T` where the columns of `S` are eigenvectors of `C^T`
/// for eigenvalues on the gap, `U` spans the complementary `C^T`-invariant
/// subspace, and `H` solves the shifted Lyapunov equation there.
fn eigenvector_certificate(c: &DMatrix<f64>, spec: &SpectralData) -> Result<DMatrix<f64>> {
    let d = c.nrows();
    let ct = to_complex(&c.transpose());
    let eye = DMatrix::<Complex64>::identity(d, d);
    let mut p = DMatrix::<Complex64>::zeros(d, d);
    let mut annihilator = eye.clone();

    let gap: Vec<_> = spec
        .clusters
        .iter()
        .filter(|cl| spec.r_mu.contains(&cl.value))
        .collect();
    for cl in &gap {
        let shifted = &ct - &eye * cl.value;
        let svd = shifted.clone().svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::InfeasibleCertificate("SVD failed".into()))?;
        for k in (d - cl.algebraic)..d {
            let w = v_t.row(k).adjoint();
            p += &w * w.adjoint();
        }
        annihilator = shifted * annihilator;
    }

    let rest = d - spec.r_mu.len();
    if rest > 0 {
        // Range of the annihilator is the C^T-invariant complement.
        let real = annihilator.map(|z| z.re);
        let svd = real.svd(true, false);
        let u_full = svd
            .u
            .ok_or_else(|| Error::InfeasibleCertificate("SVD failed".into()))?;
        let u = u_full.columns(0, rest).into_owned();
        let b = u.transpose() * c.transpose() * &u;
        let shifted = &b - DMatrix::identity(rest, rest) * spec.mu;
        let h = if min_sym_eigenvalue(&shifted) >= 0.0 {
            DMatrix::identity(rest, rest)
        } else {
            solve_stein_like(&shifted, &DMatrix::identity(rest, rest))?
        };
        p += to_complex(&(&u * h * u.transpose()));
    }
    Ok(p.map(|z| z.re))
}
