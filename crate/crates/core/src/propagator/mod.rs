//! Exact time evolution in the normalized frame (`K = I`, `f_∞` standard).

mod gaussian;
mod hermite;
mod state;

pub use gaussian::{standard_normal_density, Equilibrium, GaussianComponent, GaussianMixture};
pub use hermite::{
    build_generator_matrix, hermite_monomial_coefficients, indices_of_degree, multi_factorial,
    HermiteBasis, HermiteExpansion, MultiIndex, MAX_BASIS_SIZE,
};
pub use state::DensityState;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{matrix_exponential, symmetric_part, NormalizedSystem};

/// `E = e^{-Ct}` and `W(t) = K − E K Eᵀ` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorCache {
    pub t: f64,
    pub e: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl PropagatorCache {
    /// Normalized frame: `W = I − E Eᵀ`.
    pub fn new(c: &DMatrix<f64>, t: f64) -> Result<Self> {
        let d = c.nrows();
        Self::with_covariance(c, &DMatrix::identity(d, d), t)
    }

    /// General frame with equilibrium covariance `K`.
    pub fn with_covariance(c: &DMatrix<f64>, k: &DMatrix<f64>, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!("time {t} must be >= 0")));
        }
        let e = matrix_exponential(c, -t)?;
        let w = symmetric_part(&(k - &e * k * e.transpose()));
        Ok(PropagatorCache { t, e, w })
    }
}

/// `W(t) = 2∫₀ᵗ e^{−Cs} D e^{−Cᵀs} ds` in closed form, normalized frame.
pub fn covariance_w(c: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    Ok(PropagatorCache::new(c, t)?.w)
}

/// Evolution operator for one normalized system.
///
/// Generator matrices are built on first use per degree and shared.
#[derive(Debug)]
pub struct Propagator {
    d_tilde: DMatrix<f64>,
    c_tilde: DMatrix<f64>,
    generators: Mutex<HashMap<usize, Arc<DMatrix<f64>>>>,
}

impl Clone for Propagator {
    fn clone(&self) -> Self {
        Propagator::from_matrices(self.d_tilde.clone(), self.c_tilde.clone())
    }
}

impl Propagator {
    pub fn new(ns: &NormalizedSystem) -> Self {
        Self::from_matrices(ns.d_tilde.clone(), ns.c_tilde.clone())
    }

    /// From normalized `D̃`, `C̃` (caller guarantees `C̃_s = D̃`).
    pub fn from_matrices(d_tilde: DMatrix<f64>, c_tilde: DMatrix<f64>) -> Self {
        Propagator {
            d_tilde,
            c_tilde,
            generators: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.c_tilde.nrows()
    }
    pub fn drift(&self) -> &DMatrix<f64> {
        &self.c_tilde
    }
    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.d_tilde
    }

    pub fn cache(&self, t: f64) -> Result<PropagatorCache> {
        PropagatorCache::new(&self.c_tilde, t)
    }

    pub fn generator(&self, max_degree: usize) -> Result<Arc<DMatrix<f64>>> {
        let mut map = self.generators.lock().expect("generator cache poisoned");
        if let Some(g) = map.get(&max_degree) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(build_generator_matrix(
            &self.d_tilde,
            &self.c_tilde,
            max_degree,
        )?);
        map.insert(max_degree, Arc::clone(&g));
        Ok(g)
    }

    pub fn evolve_mixture(&self, m: &GaussianMixture, t: f64) -> Result<GaussianMixture> {
        m.evolve(&self.cache(t)?)
    }

    pub fn evolve_hermite(&self, h: &HermiteExpansion, t: f64) -> Result<HermiteExpansion> {
        if h.dim() != self.dim() {
            return Err(Error::Dimension("expansion and system differ in dimension".into()));
        }
        h.evolve_with(self.generator(h.max_degree())?.as_ref(), t)
    }

    pub fn evolve(&self, state: &DensityState, t: f64) -> Result<DensityState> {
        let cache = self.cache(t)?;
        self.evolve_cached(state, &cache)
    }

    /// Evolution reusing a precomputed `(E, W)`.
    pub fn evolve_cached(&self, state: &DensityState, cache: &PropagatorCache) -> Result<DensityState> {
        Ok(match state {
            DensityState::Mixture(m) => DensityState::Mixture(m.evolve(cache)?),
            DensityState::Hermite(h) => DensityState::Hermite(self.evolve_hermite(h, cache.t)?),
            DensityState::Combination(parts) => DensityState::Combination(
                parts
                    .iter()
                    .map(|(w, s)| Ok((*w, self.evolve_cached(s, cache)?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}
