//! Tensor Gauss–Hermite rules for the standard Gaussian weight.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::parallel;

/// Tensor rule with `Σ w_i F(x_i) ≈ ∫ F f_∞` for the standard Gaussian `f_∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    degree: usize,
    /// Row-major `len × dim`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Default points per axis: 60 for `d <= 2`, 30 for `d = 3`.
pub fn default_degree(dim: usize) -> usize {
    if dim <= 2 {
        60
    } else {
        30
    }
}

/// One-dimensional Gauss rule for `e^{-x²/2}/sqrt(2π)`, nodes ascending.
///
/// Golub–Welsch seeds refined by Newton on the orthonormal three-term
/// recurrence; weights `1 / Σ_k φ_k(x)²` (Christoffel numbers).
pub fn gauss_hermite_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 400 {
        return Err(Error::Parameter(format!("rule size {n} outside 1..=400")));
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let mut x: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    x.sort_by(|a, b| a.total_cmp(b));

    let mut w = Vec::with_capacity(n);
    for xi in x.iter_mut() {
        for _ in 0..10 {
            let (p, dp, _) = orthonormal_values(n, *xi);
            let step = p / dp;
            *xi -= step;
            if step.abs() <= 1e-16 * xi.abs().max(1.0) {
                break;
            }
        }
        let (_, _, sum_sq) = orthonormal_values(n, *xi);
        w.push(1.0 / sum_sq);
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xm = 0.5 * (x[j] - x[i]);
        let wm = 0.5 * (w[i] + w[j]);
        x[i] = -xm;
        x[j] = xm;
        w[i] = wm;
        w[j] = wm;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok((x, w))
}

/// `(φ_n(x), φ_n'(x), Σ_{k<n} φ_k(x)²)` with `φ_k = He_k / sqrt(k!)`.
fn orthonormal_values(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut d_prev, mut d) = (0.0, 0.0);
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += p * p;
        let a = ((k + 1) as f64).sqrt();
        let b = (k as f64).sqrt();
        let p_next = (x * p - b * p_prev) / a;
        let d_next = (p + x * d - b * d_prev) / a;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d, sum_sq)
}

impl QuadratureGrid {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::Dimension(format!("quadrature dimension {dim} outside 1..=3")));
        }
        let (x, w) = gauss_hermite_1d(degree)?;
        let len = degree.pow(dim as u32);
        let mut nodes = Vec::with_capacity(len * dim);
        let mut weights = Vec::with_capacity(len);
        for flat in 0..len {
            let mut rem = flat;
            let mut wt = 1.0;
            let start = nodes.len();
            nodes.resize(start + dim, 0.0);
            for axis in (0..dim).rev() {
                let k = rem % degree;
                rem /= degree;
                nodes[start + axis] = x[k];
                wt *= w[k];
            }
            weights.push(wt);
        }
        Ok(QuadratureGrid {
            dim,
            degree,
            nodes,
            weights,
        })
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(dim, default_degree(dim))
    }

    /// Same dimension, twice the points per axis.
    pub fn doubled(&self) -> Result<Self> {
        Self::new(self.dim, 2 * self.degree)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ F f_∞`, nodes evaluated in parallel when enabled.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let vals = parallel::map_indices(self.len(), |i| f(self.node(i)));
        self.weighted_sum(&vals)
    }

    /// `∫ F f_∞` on the calling thread.
    pub fn integrate_sequential<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64,
    {
        let vals = parallel::map_indices_sequential(self.len(), |i| f(self.node(i)));
        self.weighted_sum(&vals)
    }

    /// Fallible variant; returns the first failing node's error.
    pub fn try_integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync + Send,
    {
        let vals = parallel::map_indices(self.len(), |i| f(self.node(i)));
        let mut acc = 0.0;
        for (v, w) in vals.into_iter().zip(&self.weights) {
            acc += w * v?;
        }
        Ok(acc)
    }

    /// Several integrands at once; `F` fills `out` (length `k`) per node.
    pub fn try_integrate_many<F>(&self, k: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync + Send,
    {
        let vals = parallel::map_indices(self.len(), |i| {
            let mut out = vec![0.0; k];
            f(self.node(i), &mut out).map(|_| out)
        });
        let mut acc = vec![0.0; k];
        for (v, w) in vals.into_iter().zip(&self.weights) {
            for (a, x) in acc.iter_mut().zip(v?) {
                *a += w * x;
            }
        }
        Ok(acc)
    }

    /// [`Self::try_integrate_many`] with the node loop on rayon only when
    /// `parallel` is set.
    pub fn try_integrate_many_with<F>(&self, k: usize, parallel: bool, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync + Send,
    {
        if parallel {
            return self.try_integrate_many(k, f);
        }
        let mut acc = vec![0.0; k];
        let mut out = vec![0.0; k];
        for (i, w) in self.weights.iter().enumerate() {
            out.iter_mut().for_each(|v| *v = 0.0);
            f(self.node(i), &mut out)?;
            for (a, x) in acc.iter_mut().zip(&out) {
                *a += w * x;
            }
        }
        Ok(acc)
    }

    fn weighted_sum(&self, vals: &[f64]) -> f64 {
        vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Relative change between two resolutions, with an absolute floor.
pub fn relative_change(coarse: f64, fine: f64, floor: f64) -> f64 {
    (coarse - fine).abs() / fine.abs().max(floor)
}

/// Doubling check: errors with `UnderResolved` if any pair differs by more
/// than `tol` relative.
pub fn check_resolution(names: &[&str], coarse: &[f64], fine: &[f64], tol: f64) -> Result<()> {
    for ((name, a), b) in names.iter().zip(coarse).zip(fine) {
        let rel = relative_change(*a, *b, 1e-12);
        if rel > tol {
            return Err(Error::UnderResolved(format!(
                "{name}: {a:.17e} vs {b:.17e} after doubling (relative change {rel:.3e})"
            )));
        }
    }
    Ok(())
}
