//! Hermite expansions `q(x) f_∞(x)` in the normalized frame.
//!
//! The basis is `φ_α = He_α(x) / sqrt(α!) · f_∞`, orthonormal in `L²(f_∞⁻¹)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest number of basis functions a generator matrix may have.
pub const MAX_BASIS_SIZE: usize = 2000;

pub type MultiIndex = Vec<u32>;

/// Graded ordering of all multi-indices with `|α| <= max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    dim: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    offsets: Vec<usize>,
}

impl HermiteBasis {
    pub fn new(dim: usize, max_degree: usize) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::Dimension(format!("dimension {dim} outside 1..=3")));
        }
        let mut indices = Vec::new();
        let mut offsets = Vec::with_capacity(max_degree + 2);
        for m in 0..=max_degree {
            offsets.push(indices.len());
            indices.extend(indices_of_degree(dim, m));
            if indices.len() > MAX_BASIS_SIZE {
                return Err(Error::Capacity(format!(
                    "degree {max_degree} in dimension {dim} exceeds {MAX_BASIS_SIZE} basis functions"
                )));
            }
        }
        offsets.push(indices.len());
        let lookup = indices.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Ok(HermiteBasis {
            dim,
            max_degree,
            indices,
            lookup,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }
    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }
    pub fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
    /// Positions of the degree-`m` block.
    pub fn block(&self, m: usize) -> std::ops::Range<usize> {
        self.offsets[m]..self.offsets[m + 1]
    }
}

/// Multi-indices with `|α| = m`, first component descending.
pub fn indices_of_degree(dim: usize, m: usize) -> Vec<MultiIndex> {
    if dim == 1 {
        return vec![vec![m as u32]];
    }
    let mut out = Vec::new();
    for first in (0..=m).rev() {
        for mut rest in indices_of_degree(dim - 1, m - first) {
            rest.insert(0, first as u32);
            out.push(rest);
        }
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `α!`.
pub fn multi_factorial(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

/// Monomial coefficients of `He_n` (index = power).
pub fn hermite_monomial_coefficients(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for k in 1..n {
        // He_{k+1} = x He_k - k He_{k-1}
        let mut next = vec![0.0; k + 2];
        for (p, &c) in cur.iter().enumerate() {
            next[p + 1] += c;
        }
        for (p, &c) in prev.iter().enumerate() {
            next[p] -= k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `x^n = Σ_k n! / (k! (n-2k)! 2^k) He_{n-2k}`, as `(degree, coefficient)` pairs.
fn monomial_in_hermite(n: u32) -> Vec<(u32, f64)> {
    (0..=n / 2)
        .map(|k| {
            let c = factorial(n) / (factorial(k) * factorial(n - 2 * k) * 2f64.powi(k as i32));
            (n - 2 * k, c)
        })
        .collect()
}

/// Sparse multivariate polynomial with integer exponents.
#[derive(Debug, Clone, Default, PartialEq)]
struct Poly {
    terms: BTreeMap<MultiIndex, f64>,
}

impl Poly {
    fn add(&mut self, exp: MultiIndex, c: f64) {
        if c != 0.0 {
            *self.terms.entry(exp).or_insert(0.0) += c;
        }
    }

    /// `Π_i He_{α_i}(x_i)`.
    fn hermite_product(alpha: &[u32]) -> Poly {
        let mut p = Poly::default();
        p.add(vec![0; alpha.len()], 1.0);
        for (axis, &a) in alpha.iter().enumerate() {
            let uni = hermite_monomial_coefficients(a as usize);
            let mut next = Poly::default();
            for (exp, &c) in &p.terms {
                for (pow, &u) in uni.iter().enumerate() {
                    if u != 0.0 {
                        let mut e = exp.clone();
                        e[axis] += pow as u32;
                        next.add(e, c * u);
                    }
                }
            }
            p = next;
        }
        p
    }

    fn derivative(&self, axis: usize) -> Poly {
        let mut out = Poly::default();
        for (exp, &c) in &self.terms {
            if exp[axis] > 0 {
                let mut e = exp.clone();
                e[axis] -= 1;
                out.add(e, c * f64::from(exp[axis]));
            }
        }
        out
    }

    fn times_variable(&self, axis: usize) -> Poly {
        let mut out = Poly::default();
        for (exp, &c) in &self.terms {
            let mut e = exp.clone();
            e[axis] += 1;
            out.add(e, c);
        }
        out
    }

    fn axpy(&mut self, a: f64, other: &Poly) {
        for (exp, &c) in &other.terms {
            self.add(exp.clone(), a * c);
        }
    }

    /// Coefficients in the unnormalized `He_α` basis.
    fn to_hermite(&self) -> BTreeMap<MultiIndex, f64> {
        let mut out: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (exp, &c) in &self.terms {
            let mut partial: Vec<(MultiIndex, f64)> = vec![(Vec::new(), c)];
            for &power in exp {
                let expansion = monomial_in_hermite(power);
                partial = partial
                    .into_iter()
                    .flat_map(|(idx, v)| {
                        expansion.iter().map(move |&(deg, w)| {
                            let mut i = idx.clone();
                            i.push(deg);
                            (i, v * w)
                        })
                    })
                    .collect();
            }
            for (idx, v) in partial {
                *out.entry(idx).or_insert(0.0) += v;
            }
        }
        out
    }
}

/// Matrix of `L(q f_∞) = f_∞ [tr(D Hess q) − xᵀ C ∇q]` on the orthonormal
/// basis up to `max_degree`, acting on coefficient vectors.
///
/// Built by exact monomial algebra. With `D = C_s` the matrix is block
/// diagonal in degree and the degree-1 block is `−C`.
pub fn build_generator_matrix(
    d_tilde: &DMatrix<f64>,
    c_tilde: &DMatrix<f64>,
    max_degree: usize,
) -> Result<DMatrix<f64>> {
    let dim = c_tilde.nrows();
    if c_tilde.ncols() != dim || d_tilde.shape() != (dim, dim) {
        return Err(Error::Dimension("generator needs square D, C of equal size".into()));
    }
    let basis = HermiteBasis::new(dim, max_degree)?;
    let n = basis.len();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for (col, beta) in basis.indices().iter().enumerate() {
        let q = Poly::hermite_product(beta);
        let grads: Vec<Poly> = (0..dim).map(|j| q.derivative(j)).collect();
        let mut lq = Poly::default();
        for i in 0..dim {
            for j in 0..dim {
                if d_tilde[(i, j)] != 0.0 {
                    lq.axpy(d_tilde[(i, j)], &grads[j].derivative(i));
                }
                if c_tilde[(i, j)] != 0.0 {
                    lq.axpy(-c_tilde[(i, j)], &grads[j].times_variable(i));
                }
            }
        }
        let scale_beta = multi_factorial(beta).sqrt();
        for (alpha, v) in lq.to_hermite() {
            if v == 0.0 {
                continue;
            }
            let row = basis
                .index_of(&alpha)
                .ok_or_else(|| Error::Capacity(format!("index {alpha:?} left the basis")))?;
            g[(row, col)] += v * multi_factorial(&alpha).sqrt() / scale_beta;
        }
    }
    Ok(g)
}

/// `q(x) f_∞(x)` with `q = Σ c_α He_α / sqrt(α!)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    basis: Arc<HermiteBasis>,
    coefficients: DVector<f64>,
}

impl HermiteExpansion {
    /// Coefficients in the orthonormal basis, indexed by multi-index.
    pub fn new(dim: usize, max_degree: usize, coeffs: &[(MultiIndex, f64)]) -> Result<Self> {
        let basis = Arc::new(HermiteBasis::new(dim, max_degree)?);
        let mut c = DVector::zeros(basis.len());
        for (alpha, v) in coeffs {
            if alpha.len() != dim {
                return Err(Error::Dimension(format!("multi-index {alpha:?} for d = {dim}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("coefficient of {alpha:?} is {v}")));
            }
            let i = basis.index_of(alpha).ok_or_else(|| {
                Error::InvalidInput(format!("multi-index {alpha:?} exceeds degree {max_degree}"))
            })?;
            c[i] += v;
        }
        Ok(HermiteExpansion {
            basis,
            coefficients: c,
        })
    }

    /// Coefficients of the unnormalized `He_α f_∞` basis.
    pub fn from_unnormalized(
        dim: usize,
        max_degree: usize,
        coeffs: &[(MultiIndex, f64)],
    ) -> Result<Self> {
        let scaled: Vec<_> = coeffs
            .iter()
            .map(|(a, v)| (a.clone(), v * multi_factorial(a).sqrt()))
            .collect();
        Self::new(dim, max_degree, &scaled)
    }

    /// Truncated expansion of `N(m, I)`: `e^{m·x − |m|²/2} = Σ m^α / α! He_α`.
    pub fn shifted_gaussian(mean: &[f64], max_degree: usize) -> Result<Self> {
        let basis = HermiteBasis::new(mean.len(), max_degree)?;
        let coeffs: Vec<_> = basis
            .indices()
            .iter()
            .map(|a| {
                let mono: f64 = a.iter().zip(mean).map(|(&k, &m)| m.powi(k as i32)).product();
                (a.clone(), mono / multi_factorial(a).sqrt())
            })
            .collect();
        Self::new(mean.len(), max_degree, &coeffs)
    }

    pub fn from_parts(basis: Arc<HermiteBasis>, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a basis of {}",
                coefficients.len(),
                basis.len()
            )));
        }
        Ok(HermiteExpansion {
            basis,
            coefficients,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
    pub fn max_degree(&self) -> usize {
        self.basis.max_degree()
    }
    pub fn basis(&self) -> &Arc<HermiteBasis> {
        &self.basis
    }
    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn coefficient(&self, alpha: &[u32]) -> f64 {
        self.basis
            .index_of(alpha)
            .map_or(0.0, |i| self.coefficients[i])
    }

    /// Total mass, the degree-0 coefficient.
    pub fn mass(&self) -> f64 {
        self.coefficients[0]
    }

    /// `∫ x_i q f_∞`, the degree-1 coefficients.
    pub fn first_moment(&self) -> DVector<f64> {
        if self.max_degree() == 0 {
            return DVector::zeros(self.dim());
        }
        self.coefficients.rows_range(self.basis.block(1)).into_owned()
    }

    /// Highest degree with a nonzero coefficient.
    pub fn effective_degree(&self) -> usize {
        (0..=self.max_degree())
            .rev()
            .find(|&m| self.basis.block(m).any(|i| self.coefficients[i] != 0.0))
            .unwrap_or(0)
    }

    /// Copy keeping only the degree-`m` part.
    pub fn degree_part(&self, m: usize) -> HermiteExpansion {
        let mut c = DVector::zeros(self.basis.len());
        if m <= self.max_degree() {
            for i in self.basis.block(m) {
                c[i] = self.coefficients[i];
            }
        }
        HermiteExpansion {
            basis: Arc::clone(&self.basis),
            coefficients: c,
        }
    }

    /// `‖q f_∞‖_{L²(f_∞⁻¹)}`.
    pub fn l2_norm(&self) -> f64 {
        self.coefficients.norm()
    }

    /// Advances coefficients by `exp(G t)`.
    pub fn evolve_with(&self, generator: &DMatrix<f64>, t: f64) -> Result<HermiteExpansion> {
        if t < 0.0 {
            return Err(Error::Parameter(format!("time {t} < 0")));
        }
        let e = crate::matrix::matrix_exponential(generator, t)?;
        Ok(HermiteExpansion {
            basis: Arc::clone(&self.basis),
            coefficients: e * &self.coefficients,
        })
    }

    /// `q(x)` and `∇q(x)`; `grad` must have length `dim`.
    pub fn ratio_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let dim = self.dim();
        let m = self.max_degree();
        // Normalized He_k(x_i)/sqrt(k!) and derivatives per axis.
        let mut h = [[0.0f64; 64]; 3];
        let mut dh = [[0.0f64; 64]; 3];
        assert!(m < 64, "degree {m} too large for evaluation buffers");
        for i in 0..dim {
            let xi = x[i];
            h[i][0] = 1.0;
            if m >= 1 {
                h[i][1] = xi;
            }
            for k in 1..m {
                // He_{k+1}/sqrt((k+1)!) = (x He_k/sqrt(k!) - sqrt(k) He_{k-1}/sqrt((k-1)!)) / sqrt(k+1)
                h[i][k + 1] = (xi * h[i][k] - (k as f64).sqrt() * h[i][k - 1]) / ((k + 1) as f64).sqrt();
            }
            for k in 1..=m {
                dh[i][k] = (k as f64).sqrt() * h[i][k - 1];
            }
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (idx, alpha) in self.basis.indices().iter().enumerate() {
            let c = self.coefficients[idx];
            if c == 0.0 {
                continue;
            }
            let mut prod = 1.0;
            for i in 0..dim {
                prod *= h[i][alpha[i] as usize];
            }
            value += c * prod;
            for j in 0..dim {
                let mut p = c * dh[j][alpha[j] as usize];
                for i in 0..dim {
                    if i != j {
                        p *= h[i][alpha[i] as usize];
                    }
                }
                grad[j] += p;
            }
        }
        value
    }

    pub fn scaled(&self, s: f64) -> HermiteExpansion {
        HermiteExpansion {
            basis: Arc::clone(&self.basis),
            coefficients: &self.coefficients * s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, rows, v)
    }

    fn sorted_eigs(block: DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = block.complex_eigenvalues().iter().map(|z| z.re).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    #[test]
    fn hermite_polynomials() {
        assert_eq!(hermite_monomial_coefficients(2), vec![-1.0, 0.0, 1.0]);
        assert_eq!(hermite_monomial_coefficients(3), vec![0.0, -3.0, 0.0, 1.0]);
        assert_eq!(hermite_monomial_coefficients(4), vec![3.0, 0.0, -6.0, 0.0, 1.0]);
    }

    #[test]
    fn monomial_round_trip() {
        for a in 0..8u32 {
            let p = Poly::hermite_product(&[a]);
            let back = p.to_hermite();
            for (idx, v) in back {
                let expected = if idx[0] == a { 1.0 } else { 0.0 };
                assert_relative_eq!(v, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn basis_ordering() {
        let b = HermiteBasis::new(2, 2).unwrap();
        assert_eq!(
            b.indices(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(b.block(1), 1..3);
        assert!(HermiteBasis::new(3, 40).is_err());
    }

    #[test]
    fn degree_one_block_is_minus_c() {
        let c = m(3, &[1.0, 2.0, 0.5, -2.0, 1.0, 0.3, 0.0, 0.1, 2.0]);
        let d = crate::matrix::symmetric_part(&c);
        let g = build_generator_matrix(&d, &c, 3).unwrap();
        let block = g.view((1, 1), (3, 3)).into_owned();
        assert_eq!(block, -&c);
    }

    #[test]
    fn block_structure_is_diagonal_in_degree() {
        let c = m(2, &[1.0, 1.0, 0.0, 1.0]);
        let d = crate::matrix::symmetric_part(&c);
        let g = build_generator_matrix(&d, &c, 4).unwrap();
        let basis = HermiteBasis::new(2, 4).unwrap();
        for (r, ar) in basis.indices().iter().enumerate() {
            for (s, as_) in basis.indices().iter().enumerate() {
                let dr: u32 = ar.iter().sum();
                let ds: u32 = as_.iter().sum();
                if dr != ds {
                    assert!(g[(r, s)].abs() < 1e-12, "({ar:?}, {as_:?}) = {}", g[(r, s)]);
                }
            }
        }
    }

    #[test]
    fn degree_two_spectrum_diag() {
        let c = m(2, &[1.0, 0.0, 0.0, 2.0]);
        let g = build_generator_matrix(&c, &c, 2).unwrap();
        let eig = sorted_eigs(g.view((3, 3), (3, 3)).into_owned());
        assert_relative_eq!(eig[0], -4.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], -3.0, epsilon = 1e-12);
        assert_relative_eq!(eig[2], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_degree_two_block() {
        let c = DMatrix::identity(2, 2);
        let g = build_generator_matrix(&c, &c, 2).unwrap();
        assert_eq!(g.view((3, 3), (3, 3)).into_owned(), DMatrix::identity(3, 3) * -2.0);
    }

    #[test]
    fn evaluation_matches_generating_function() {
        let mean = [0.3, -0.2];
        let h = HermiteExpansion::shifted_gaussian(&mean, 20).unwrap();
        for x in [[0.0, 0.0], [1.0, -0.5], [2.0, 1.5]] {
            let mut g = [0.0; 2];
            let r = h.ratio_and_grad(&x, &mut g);
            let dot = mean[0] * x[0] + mean[1] * x[1];
            let exact = (dot - 0.5 * (mean[0] * mean[0] + mean[1] * mean[1])).exp();
            assert_relative_eq!(r, exact, max_relative = 1e-12);
            assert_relative_eq!(g[0], mean[0] * exact, max_relative = 1e-12);
            assert_relative_eq!(g[1], mean[1] * exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn x1_ratio_gradient_is_constant() {
        let h = HermiteExpansion::new(2, 1, &[(vec![1, 0], 1.0)]).unwrap();
        let mut g = [0.0; 2];
        let r = h.ratio_and_grad(&[0.7, -3.0], &mut g);
        assert_relative_eq!(r, 0.7);
        assert_eq!(g, [1.0, 0.0]);
    }

    #[test]
    fn unnormalized_scaling() {
        let h = HermiteExpansion::from_unnormalized(2, 2, &[(vec![2, 0], 1.0)]).unwrap();
        assert_relative_eq!(h.coefficient(&[2, 0]), 2f64.sqrt());
        let mut g = [0.0; 2];
        assert_relative_eq!(h.ratio_and_grad(&[2.0, 0.0], &mut g), 3.0, epsilon = 1e-14);
    }
}
