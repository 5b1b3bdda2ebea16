//! Explicit times and constants of the contractivity, lower-bound and
//! main decay results, evaluated from `(d, μ, n, c̃, ĉ, p_max)`.

use crate::error::{Error, Result};
use crate::functionals::moment_exponent;
use crate::matrix::SpectralData;

/// Inputs to every explicit time and constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsBundle {
    pub dim: usize,
    pub mu: f64,
    pub n: usize,
    pub c_tilde: f64,
    pub c_hat: f64,
    /// Largest eigenvalue of the Fisher weight `P`.
    pub p_max: f64,
    /// `ε` in the main theorem times `τ₀, τ₁, τ₂`.
    pub eps: f64,
    /// `η` for the lower bound and the `p < 2` contractivity estimate.
    pub eta: f64,
}

/// `b^e` with `0^0 = 1`.
fn pow0(base: f64, exp: f64) -> f64 {
    if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("p = {p} outside (1, 2]")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {v} must be finite and > 0")))
    }
}

/// Largest `ε₁ ∈ (0, 1/8]` with `(1−2ε₁)/(1−4ε₁)·ε₁²/2 + ε₁ ≤ ε`.
pub fn hyper_inner_eps(eps: f64) -> Result<f64> {
    check_positive("ε", eps)?;
    let h = |e: f64| (1.0 - 2.0 * e) / (1.0 - 4.0 * e) * e * e / 2.0 + e;
    if h(0.125) <= eps {
        return Ok(0.125);
    }
    // h is increasing on (0, 1/8] with h(0) = 0.
    let (mut lo, mut hi) = (0.0, 0.125);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * hi {
            break;
        }
    }
    Ok(lo)
}

impl BoundsBundle {
    pub fn new(dim: usize, spec: &SpectralData, p_max: f64, eps: f64, eta: f64) -> Result<Self> {
        Self::from_constants(dim, spec.mu, spec.n, spec.c_tilde, spec.c_hat, p_max, eps, eta)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_constants(
        dim: usize,
        mu: f64,
        n: usize,
        c_tilde: f64,
        c_hat: f64,
        p_max: f64,
        eps: f64,
        eta: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension 0".into()));
        }
        check_positive("μ", mu)?;
        check_positive("c̃", c_tilde)?;
        check_positive("ĉ", c_hat)?;
        check_positive("p_max", p_max)?;
        check_positive("ε", eps)?;
        check_positive("η", eta)?;
        Ok(BoundsBundle {
            dim,
            mu,
            n,
            c_tilde,
            c_hat,
            p_max,
            eps,
            eta,
        })
    }

    /// Same bundle with `c̃, ĉ` multiplied by `s`.
    pub fn with_scaled_constants(&self, s: f64) -> Self {
        BoundsBundle {
            c_tilde: self.c_tilde * s,
            c_hat: self.c_hat * s,
            ..self.clone()
        }
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }

    /// `(2n/(μe))^k` with `0^0 = 1`.
    fn poly_peak(&self, k: usize) -> f64 {
        pow0(
            2.0 * self.n as f64 / (self.mu * std::f64::consts::E),
            k as f64,
        )
    }

    /// `t̃(ε) = (2/μ) log(c̃(1+(2n/(μe))ⁿ)/ε)`, after which `‖e^{−Ct}‖ ≤ ε`.
    /// Clamped at 0.
    pub fn t_tilde(&self, eps: f64) -> Result<f64> {
        check_positive("ε", eps)?;
        let t = 2.0 / self.mu * (self.c_tilde * (1.0 + self.poly_peak(self.n)) / eps).ln();
        Ok(t.max(0.0))
    }

    /// `t̂(ε) = (1/μ) log(ĉ(1+ε)(1+(2n/(μe))^{2n})/ε)`, after which
    /// `‖W − I‖, ‖W⁻¹ − I‖ ≤ ε`. Clamped at 0.
    pub fn t_hat(&self, eps: f64) -> Result<f64> {
        check_positive("ε", eps)?;
        let t = 1.0 / self.mu
            * (self.c_hat * (1.0 + eps) * (1.0 + self.poly_peak(2 * self.n)) / eps).ln();
        Ok(t.max(0.0))
    }

    /// `t̃₁(ε) = max(t̃(ε₁), t̂(ε₁))` with `ε₁` from [`hyper_inner_eps`].
    pub fn t_tilde_1(&self, eps: f64) -> Result<f64> {
        let e1 = hyper_inner_eps(eps)?;
        Ok(self.t_tilde(e1)?.max(self.t_hat(e1)?))
    }

    /// Hypercontractivity time `t₁(p₂) = t̃₁(ε(p₂))`, `ε(p) = (p−1)/(2(2p−1))`.
    pub fn t1(&self, p2: f64) -> Result<f64> {
        check_p(p2)?;
        self.t_tilde_1(moment_exponent(p2))
    }

    /// Lower-bound time `t̂₁(η) = max(t̂(η/2), t̃(η/2))`.
    pub fn t_hat_1(&self, eta: f64) -> Result<f64> {
        check_positive("η", eta)?;
        Ok(self.t_hat(eta / 2.0)?.max(self.t_tilde(eta / 2.0)?))
    }

    /// `t̂̂₁(ε, η) = t̂₁(min(1, η, ηε))`.
    pub fn t_hat_hat_1(&self, eps: f64, eta: f64) -> Result<f64> {
        check_positive("ε", eps)?;
        check_positive("η", eta)?;
        self.t_hat_1(1f64.min(eta).min(eta * eps))
    }

    /// `t₃(η₂) = max(t̃(η₂), t̂(η₂))`.
    pub fn t3(&self, eta2: f64) -> Result<f64> {
        Ok(self.t_tilde(eta2)?.max(self.t_hat(eta2)?))
    }

    /// `t₂(ε₁, ε₂, η) = max(t̂̂₁(ε₁, min(1/8, η)), t₃(min(1/8, ε₂)))`.
    pub fn t2(&self, eps1: f64, eps2: f64, eta: f64) -> Result<f64> {
        check_positive("ε₂", eps2)?;
        let a = self.t_hat_hat_1(eps1, 0.125f64.min(eta))?;
        Ok(a.max(self.t3(0.125f64.min(eps2))?))
    }

    /// `t₁(p₁, p₂, η) = t₂(ε(p₁), ε(p₂), η)`.
    pub fn t1_hypo(&self, p1: f64, p2: f64, eta: f64) -> Result<f64> {
        check_p(p1)?;
        check_p(p2)?;
        self.t2(moment_exponent(p1), moment_exponent(p2), eta)
    }

    /// `τ₃ = t̃₁(1/6)`.
    pub fn tau3(&self) -> Result<f64> {
        self.t_tilde_1(1.0 / 6.0)
    }

    /// `τ₁(p, p̃, ε) = max(t̂̂₁(ε(p), η(ε, p̃)), t₁(p))` with
    /// `η(ε, p̃) = min(2ε, 1/(4(2−p̃)))`.
    pub fn tau1(&self, p: f64, p_tilde: f64) -> Result<f64> {
        check_p(p)?;
        let eta = if p_tilde >= 2.0 {
            2.0 * self.eps
        } else {
            (2.0 * self.eps).min(1.0 / (4.0 * (2.0 - p_tilde)))
        };
        Ok(self.t_hat_hat_1(moment_exponent(p), eta)?.max(self.t1(p)?))
    }

    /// `τ₂(p, ε) = max(τ₃ + t₁(p), t₁(p, 2, 2ε))`.
    pub fn tau2(&self, p: f64) -> Result<f64> {
        let shifted = self.tau3()? + self.t1(p)?;
        Ok(shifted.max(self.t1_hypo(p, 2.0, 2.0 * self.eps)?))
    }

    /// `τ₀(p, ε) = max(τ₁(p, p, ε), τ₂(p, ε))`.
    pub fn tau0(&self, p: f64) -> Result<f64> {
        Ok(self.tau1(p, p)?.max(self.tau2(p)?))
    }

    /// `𝒜(p₂) = (8/3)^d ((2p₂−1)/(p₂−1))^{d(p₂−1)/p₂} (2p₂)^{2/(p₂−1)}`.
    pub fn a_const(&self, p2: f64) -> Result<f64> {
        check_p(p2)?;
        let d = self.d();
        Ok((8.0f64 / 3.0).powf(d)
            * ((2.0 * p2 - 1.0) / (p2 - 1.0)).powf(d * (p2 - 1.0) / p2)
            * (2.0 * p2).powf(2.0 / (p2 - 1.0)))
    }

    /// `ℬ(p₂) = 2^{3d/2} ((2p₂−1)/(p₂−1))^{d(p₂−1)/p₂} (2p₂)^{2/(p₂−1)} p_max`.
    pub fn b_const(&self, p2: f64) -> Result<f64> {
        check_p(p2)?;
        let d = self.d();
        Ok(2f64.powf(1.5 * d)
            * ((2.0 * p2 - 1.0) / (p2 - 1.0)).powf(d * (p2 - 1.0) / p2)
            * (2.0 * p2).powf(2.0 / (p2 - 1.0))
            * self.p_max)
    }

    /// `𝒞(p, p₁, p₂, η)` for `p ∈ [1, 2)`.
    pub fn c_const(&self, p: f64, p1: f64, p2: f64, eta: f64) -> Result<f64> {
        if !(1.0..2.0).contains(&p) {
            return Err(Error::Parameter(format!("p = {p} outside [1, 2)")));
        }
        check_p(p1)?;
        check_p(p2)?;
        check_positive("η", eta)?;
        let d = self.d();
        let q = 2.0 - p;
        Ok(2f64.powf((eta + 1.0 - d / 2.0) * q + 1.0 + 2.0 * d)
            * 3f64.powf(d * q / 2.0)
            * (2.0 * p2).powf(2.0 / (p2 - 1.0))
            * ((2.0 * p1 - 1.0) / (p1 - 1.0)).powf(d * eta * (p1 - 1.0) * q / (2.0 * p1))
            * ((2.0 * p2 - 1.0) / (p2 - 1.0)).powf(d * (p2 - 1.0) / p2)
            * self.p_max)
    }

    /// `2^{3d/2+1} 3^{d/2}`, the factor in `I₂^I(g(t)) ≤ · e₂(g₀)` for `t ≥ τ₃`.
    pub fn improved_hyper_const(&self) -> f64 {
        let d = self.d();
        2f64.powf(1.5 * d + 1.0) * 3f64.powf(d / 2.0)
    }

    /// `C_{η,f₀} = (2M)^{−η(1+η)(1+2η)/(8ε)} / (2(π(2+η))^{d/2})` with
    /// `M = ∫ e^{ε|x|²} f₀`.
    pub fn lower_bound_constant(&self, eta: f64, eps: f64, moment: f64) -> Result<f64> {
        check_positive("η", eta)?;
        check_positive("ε", eps)?;
        if !(moment.is_finite() && moment >= 1.0 - 1e-12) {
            return Err(Error::Parameter(format!(
                "exponential moment {moment} must be finite and >= 1 for unit mass"
            )));
        }
        let expo = -eta * (1.0 + eta) * (1.0 + 2.0 * eta) / (8.0 * eps);
        let denom = 2.0 * (std::f64::consts::PI * (2.0 + eta)).powf(self.d() / 2.0);
        Ok((2.0 * moment).powf(expo) / denom)
    }
}

/// `[p(p−1)e_p + 1]`, the entropy factor shared by the contractivity bounds.
pub fn entropy_factor(p: f64, e_p: f64) -> f64 {
    p * (p - 1.0) * e_p + 1.0
}
