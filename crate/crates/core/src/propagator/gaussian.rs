use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::PropagatorCache;
use crate::error::{Error, Result};

/// `f_∞(x) = c_K exp(-½ xᵀ K⁻¹ x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub k_inv: DMatrix<f64>,
    /// `log c_K`.
    pub log_norm: f64,
}

impl Equilibrium {
    pub fn from_covariance(k: &DMatrix<f64>) -> Result<Self> {
        let d = k.nrows();
        let chol = k
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("equilibrium covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Equilibrium {
            k_inv: chol.inverse(),
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    /// Standard Gaussian, the equilibrium of the normalized frame.
    pub fn standard(d: usize) -> Self {
        Equilibrium {
            k_inv: DMatrix::identity(d, d),
            log_norm: -0.5 * d as f64 * (2.0 * PI).ln(),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        (self.log_norm - 0.5 * v.dot(&(&self.k_inv * &v))).exp()
    }
}

/// Standard normal density in `d` dimensions.
pub fn standard_normal_density(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (-0.5 * r2 - 0.5 * x.len() as f64 * (2.0 * PI).ln()).exp()
}

/// One weighted Gaussian `w N(m, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, mean has length {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !weight.is_finite()
            || mean.iter().any(|v| !v.is_finite())
            || covariance.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("non-finite mixture component".into()));
        }
        let covariance = crate::matrix::symmetric_part(&covariance);
        let chol = covariance.clone().cholesky().ok_or_else(|| {
            Error::InvalidInput("mixture covariance is not positive definite".into())
        })?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(GaussianComponent {
            weight,
            mean,
            precision: chol.inverse(),
            covariance,
            log_det,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Unweighted `log(N(x; m, Σ) / f_∞(x))` with standard `f_∞`; also fills
    /// `dir = -Σ⁻¹(x - m) + x`, the gradient of that logarithm.
    fn log_ratio(&self, x: &[f64], dir: &mut [f64]) -> f64 {
        let d = x.len();
        let mut quad = 0.0;
        let mut r2 = 0.0;
        for i in 0..d {
            let py: f64 = x
                .iter()
                .zip(self.mean.iter())
                .enumerate()
                .map(|(j, (xj, mj))| self.precision[(i, j)] * (xj - mj))
                .sum();
            quad += (x[i] - self.mean[i]) * py;
            r2 += x[i] * x[i];
            dir[i] = x[i] - py;
        }
        -0.5 * self.log_det - 0.5 * quad + 0.5 * r2
    }

    fn evolve(&self, cache: &PropagatorCache) -> Result<Self> {
        let e = &cache.e;
        GaussianComponent::new(
            self.weight,
            e * &self.mean,
            &cache.w + e * &self.covariance * e.transpose(),
        )
    }
}

/// Finite (possibly signed) Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let dim = components
            .first()
            .ok_or_else(|| Error::InvalidInput("empty mixture".into()))?
            .mean
            .len();
        if components.iter().any(|c| c.mean.len() != dim) {
            return Err(Error::Dimension("mixture components differ in dimension".into()));
        }
        Ok(GaussianMixture { dim, components })
    }

    /// Standard Gaussian `f_∞` of the normalized frame.
    pub fn standard(d: usize) -> Self {
        Self::shifted(&vec![0.0; d])
    }

    /// `N(m, I)`.
    pub fn shifted(mean: &[f64]) -> Self {
        let d = mean.len();
        GaussianMixture {
            dim: d,
            components: vec![GaussianComponent::new(
                1.0,
                DVector::from_column_slice(mean),
                DMatrix::identity(d, d),
            )
            .expect("identity covariance")],
        }
    }

    /// Single `N(m, Σ)` with unit weight.
    pub fn gaussian(mean: &[f64], covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![GaussianComponent::new(
            1.0,
            DVector::from_column_slice(mean),
            covariance,
        )?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn first_moment(&self) -> DVector<f64> {
        self.components
            .iter()
            .fold(DVector::zeros(self.dim), |acc, c| acc + &c.mean * c.weight)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.components.iter().all(|c| c.weight >= 0.0)
    }

    /// `f / f_∞` and its gradient in the normalized frame.
    pub fn ratio_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut dir = [0.0f64; 3];
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for c in &self.components {
            let r = c.weight * c.log_ratio(x, &mut dir[..d]).exp();
            value += r;
            for i in 0..d {
                grad[i] += r * dir[i];
            }
        }
        value
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        self.components
            .iter()
            .map(|c| {
                let y = &v - &c.mean;
                let q = y.dot(&(&c.precision * &y));
                c.weight
                    * (-0.5 * (q + c.log_det + d_log_2pi(self.dim))).exp()
            })
            .sum()
    }

    /// Exact solution: each `(w, m, Σ)` maps to `(w, E m, W + E Σ Eᵀ)`.
    pub fn evolve(&self, cache: &PropagatorCache) -> Result<Self> {
        if cache.e.nrows() != self.dim {
            return Err(Error::Dimension("propagator and mixture differ in dimension".into()));
        }
        Ok(GaussianMixture {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| c.evolve(cache))
                .collect::<Result<_>>()?,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        GaussianMixture {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| GaussianComponent {
                    weight: c.weight * s,
                    ..c.clone()
                })
                .collect(),
        }
    }
}

fn d_log_2pi(d: usize) -> f64 {
    d as f64 * (2.0 * PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_is_normalized_standard() {
        let eq = Equilibrium::standard(2);
        assert_relative_eq!(eq.density(&[0.0, 0.0]), 1.0 / (2.0 * PI), max_relative = 1e-15);
        let k = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.0]);
        let eq = Equilibrium::from_covariance(&k).unwrap();
        assert_relative_eq!(eq.log_norm, -(2.0 * PI).ln() - 0.5 * 1.25f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn shifted_gaussian_ratio_gradient() {
        let m = [0.4, -0.3];
        let f = GaussianMixture::shifted(&m);
        let x = [1.1, 0.2];
        let mut g = [0.0; 2];
        let r = f.ratio_and_grad(&x, &mut g);
        let exact = (m[0] * x[0] + m[1] * x[1] - 0.5 * (m[0] * m[0] + m[1] * m[1])).exp();
        assert_relative_eq!(r, exact, max_relative = 1e-14);
        assert_relative_eq!(g[0], m[0] * exact, max_relative = 1e-14);
        assert_relative_eq!(g[1], m[1] * exact, max_relative = 1e-14);
        assert_relative_eq!(f.density(&x), exact * standard_normal_density(&x), max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_covariance() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianMixture::gaussian(&[0.0, 0.0], bad).is_err());
        assert!(GaussianMixture::new(vec![]).is_err());
    }

    #[test]
    fn signed_mixture_moments() {
        let a = GaussianComponent::new(2.0, DVector::from_vec(vec![1.0]), DMatrix::identity(1, 1)).unwrap();
        let b = GaussianComponent::new(-1.0, DVector::from_vec(vec![3.0]), DMatrix::identity(1, 1)).unwrap();
        let g = GaussianMixture::new(vec![a, b]).unwrap();
        assert_relative_eq!(g.mass(), 1.0);
        assert_relative_eq!(g.first_moment()[0], -1.0);
        assert!(!g.is_nonnegative());
    }
}
