//! Entropies, Fisher informations and moments of densities in the normalized
//! frame, evaluated by tensor Gauss–Hermite quadrature.

mod psi;
mod quadrature;

pub use psi::{PEntropy, RATIO_FLOOR};
pub use quadrature::{
    check_resolution, default_degree, gauss_hermite_1d, relative_change, QuadratureGrid,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::propagator::{DensityState, GaussianMixture};

/// Log-Sobolev constant of the standard Gaussian.
pub const C_LS: f64 = 0.5;

/// Negative ratios down to this are treated as round-off in the strict
/// entropy path.
const NEGATIVE_SLACK: f64 = 1e-12;

/// `e_p(f | f_∞) = ∫ ψ_p(f/f_∞) f_∞` for a non-negative `f`.
pub fn entropy_p(f: &DensityState, p: f64, grid: &QuadratureGrid) -> Result<f64> {
    let psi = PEntropy::new(p)?;
    check_dim(f, grid)?;
    grid.try_integrate(|x| {
        let r = f.ratio(x);
        if r < -NEGATIVE_SLACK {
            return Err(Error::Domain(format!(
                "density ratio {r:.3e} < 0 at {x:?}"
            )));
        }
        Ok(psi.psi(r.max(0.0)))
    })
}

/// `e_p(|g| | f_∞)`, the general-mass form
/// `(‖g‖^p_{L^p(f_∞^{1−p})} − p(‖g‖_{L¹} − 1) − 1) / (p(p−1))`.
pub fn entropy_p_abs(g: &DensityState, p: f64, grid: &QuadratureGrid) -> Result<f64> {
    let psi = PEntropy::new(p)?;
    check_dim(g, grid)?;
    Ok(grid.integrate(|x| psi.psi(g.ratio(x).abs())))
}

/// `‖g‖_{L^p(f_∞^{1−p})} = (∫ |g/f_∞|^p f_∞)^{1/p}`.
pub fn weighted_lp_norm(g: &DensityState, p: f64, grid: &QuadratureGrid) -> Result<f64> {
    check_dim(g, grid)?;
    Ok(grid.integrate(|x| g.ratio(x).abs().powf(p)).powf(1.0 / p))
}

/// `‖g‖_{L¹}` by quadrature.
pub fn l1_norm(g: &DensityState, grid: &QuadratureGrid) -> Result<f64> {
    check_dim(g, grid)?;
    Ok(grid.integrate(|x| g.ratio(x).abs()))
}

/// `I_p^P(f) = 𝓘_p^P(f, f)`.
pub fn fisher_p(f: &DensityState, p: f64, pm: &DMatrix<f64>, grid: &QuadratureGrid) -> Result<f64> {
    generalized_fisher(f, f, p, pm, grid)
}

/// `𝓘_p^P(f, g) = ∫ ψ_p''(f/f_∞) ∇(g/f_∞)ᵀ P ∇(g/f_∞) f_∞`.
///
/// For `p < 2`, `f/f_∞` must exceed `RATIO_FLOOR` at every node.
pub fn generalized_fisher(
    f: &DensityState,
    g: &DensityState,
    p: f64,
    pm: &DMatrix<f64>,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let psi = PEntropy::new(p)?;
    check_dim(f, grid)?;
    check_dim(g, grid)?;
    let d = grid.dim();
    if pm.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "P is {}x{}, expected {d}x{d}",
            pm.nrows(),
            pm.ncols()
        )));
    }
    grid.try_integrate(|x| {
        let mut grad = [0.0f64; 3];
        g.ratio_and_grad(x, &mut grad[..d]);
        let weight = if p == 2.0 {
            1.0
        } else {
            let r = f.ratio(x);
            if !(r >= RATIO_FLOOR) {
                return Err(Error::SingularIntegrand {
                    node: x.to_vec(),
                    ratio: r,
                });
            }
            psi.psi_second(r)
        };
        Ok(weight * quadratic_form(pm, &grad[..d]))
    })
}

fn quadratic_form(pm: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += v[i] * pm[(i, j)] * v[j];
        }
    }
    s
}

/// `∫ e^{ε|x|²} |f(x)| dx`.
///
/// Closed form for mixtures with non-negative weights,
/// `det(I − 2εΣ)^{−1/2} exp(ε mᵀ (I − 2εΣ)⁻¹ m)` per component; quadrature
/// otherwise.
pub fn exponential_moment(f: &DensityState, eps: f64, grid: &QuadratureGrid) -> Result<f64> {
    if !(eps.is_finite() && (0.0..0.5).contains(&eps)) {
        return Err(Error::DivergentMoment(format!("ε = {eps} outside [0, 1/2)")));
    }
    match f {
        DensityState::Mixture(m) if m.is_nonnegative() => mixture_exponential_moment(m, eps),
        _ => {
            check_dim(f, grid)?;
            Ok(grid.integrate(|x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (eps * r2).exp() * f.ratio(x).abs()
            }))
        }
    }
}

fn mixture_exponential_moment(m: &GaussianMixture, eps: f64) -> Result<f64> {
    let d = m.dim();
    let mut total = 0.0;
    for c in m.components() {
        let a = DMatrix::<f64>::identity(d, d) - c.covariance() * (2.0 * eps);
        let chol = crate::matrix::symmetric_part(&a).cholesky().ok_or_else(|| {
            Error::DivergentMoment(format!(
                "I − 2εΣ not positive definite for ε = {eps}"
            ))
        })?;
        let det: f64 = chol.l().diagonal().iter().map(|v| v * v).product();
        let sol = chol.solve(c.mean());
        total += c.weight() * det.powf(-0.5) * (eps * c.mean().dot(&sol)).exp();
    }
    Ok(total)
}

/// Moment bound check at `ε = (p−1)/(2(2p−1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBound {
    pub p: f64,
    pub eps: f64,
    pub moment: f64,
    pub bound: f64,
    pub unit_mass: bool,
    pub holds: bool,
}

/// `ε(p) = (p−1)/(2(2p−1))`.
pub fn moment_exponent(p: f64) -> f64 {
    (p - 1.0) / (2.0 * (2.0 * p - 1.0))
}

/// Upper bound on `∫ e^{ε(p)|x|²}|f|` from `e_p(|f|)`:
/// `((2p−1)/(p−1))^{d(p−1)/(2p)} [p(p−1)e_p + 1]^{1/p}`, times
/// `(2p)^{1/(p−1)}` unless `f` has unit mass.
pub fn exponential_moment_bound_value(d: usize, p: f64, e_p: f64, unit_mass: bool) -> f64 {
    let base = ((2.0 * p - 1.0) / (p - 1.0)).powf(d as f64 * (p - 1.0) / (2.0 * p))
        * (p * (p - 1.0) * e_p + 1.0).powf(1.0 / p);
    if unit_mass {
        base
    } else {
        base * (2.0 * p).powf(1.0 / (p - 1.0))
    }
}

/// Evaluates the moment at `ε(p)` together with its entropy bound.
pub fn exponential_moment_bound(
    f: &DensityState,
    p: f64,
    grid: &QuadratureGrid,
) -> Result<MomentBound> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Parameter(format!("p = {p} outside (1, 2]")));
    }
    let eps = moment_exponent(p);
    let moment = exponential_moment(f, eps, grid)?;
    let e_p = entropy_p_abs(f, p, grid)?;
    let unit_mass = f.is_nonnegative_mixture() && (f.mass() - 1.0).abs() <= 1e-12;
    let bound = exponential_moment_bound_value(grid.dim(), p, e_p, unit_mass);
    Ok(MomentBound {
        p,
        eps,
        moment,
        bound,
        unit_mass,
        holds: moment <= bound * (1.0 + 1e-10),
    })
}

/// `e_p / I_p^I`, with `0/0 = 0`.
pub fn log_sobolev_ratio(f: &DensityState, p: f64, grid: &QuadratureGrid) -> Result<f64> {
    let e = entropy_p(f, p, grid)?;
    let identity = DMatrix::identity(grid.dim(), grid.dim());
    let i = fisher_p(f, p, &identity, grid)?;
    const ZERO: f64 = 1e-14;
    if i <= ZERO {
        if e <= ZERO {
            return Ok(0.0);
        }
        return Err(Error::Inconsistency(format!(
            "Fisher information {i:.3e} vanishes but entropy is {e:.3e}"
        )));
    }
    Ok(e / i)
}

fn check_dim(f: &DensityState, grid: &QuadratureGrid) -> Result<()> {
    if f.dim() != grid.dim() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, grid {}",
            f.dim(),
            grid.dim()
        )));
    }
    Ok(())
}
