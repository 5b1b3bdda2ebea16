use nalgebra::DVector;

use super::gaussian::standard_normal_density;
use super::{GaussianMixture, HermiteExpansion};

/// A solution representation in the normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityState {
    Mixture(GaussianMixture),
    Hermite(HermiteExpansion),
    /// `Σ w_k s_k`, evaluated lazily.
    Combination(Vec<(f64, DensityState)>),
}

impl DensityState {
    pub fn dim(&self) -> usize {
        match self {
            DensityState::Mixture(m) => m.dim(),
            DensityState::Hermite(h) => h.dim(),
            DensityState::Combination(parts) => parts.first().map_or(0, |(_, s)| s.dim()),
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            DensityState::Mixture(m) => m.mass(),
            DensityState::Hermite(h) => h.mass(),
            DensityState::Combination(parts) => parts.iter().map(|(w, s)| w * s.mass()).sum(),
        }
    }

    /// `∫ x f(x) dx`, exact for every representation.
    pub fn first_moment(&self) -> DVector<f64> {
        match self {
            DensityState::Mixture(m) => m.first_moment(),
            DensityState::Hermite(h) => h.first_moment(),
            DensityState::Combination(parts) => parts
                .iter()
                .fold(DVector::zeros(self.dim()), |acc, (w, s)| acc + s.first_moment() * *w),
        }
    }

    /// Mixture with non-negative weights, or a combination of such with
    /// non-negative weights.
    pub fn is_nonnegative_mixture(&self) -> bool {
        match self {
            DensityState::Mixture(m) => m.is_nonnegative(),
            DensityState::Hermite(_) => false,
            DensityState::Combination(parts) => parts
                .iter()
                .all(|(w, s)| *w >= 0.0 && s.is_nonnegative_mixture()),
        }
    }

    /// `f/f_∞` at `x`, with `∇(f/f_∞)` written into `grad`.
    pub fn ratio_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            DensityState::Mixture(m) => m.ratio_and_grad(x, grad),
            DensityState::Hermite(h) => h.ratio_and_grad(x, grad),
            DensityState::Combination(parts) => {
                let mut tmp = [0.0f64; 3];
                let d = grad.len();
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut value = 0.0;
                for (w, s) in parts {
                    value += w * s.ratio_and_grad(x, &mut tmp[..d]);
                    for i in 0..d {
                        grad[i] += w * tmp[i];
                    }
                }
                value
            }
        }
    }

    pub fn ratio(&self, x: &[f64]) -> f64 {
        let mut g = [0.0f64; 3];
        self.ratio_and_grad(x, &mut g[..x.len()])
    }

    /// `∇(f/f_∞)(x)`.
    pub fn ratio_gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = vec![0.0; x.len()];
        self.ratio_and_grad(x, &mut g);
        DVector::from_vec(g)
    }

    /// `f(x)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            DensityState::Mixture(m) => m.density(x),
            _ => self.ratio(x) * standard_normal_density(x),
        }
    }

    /// Lazy difference `self − other`.
    pub fn minus(&self, other: DensityState) -> DensityState {
        DensityState::Combination(vec![(1.0, self.clone()), (-1.0, other)])
    }
}
