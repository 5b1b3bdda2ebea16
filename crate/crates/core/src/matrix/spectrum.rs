use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    ensure_finite, ensure_square, matrix_exponential, numerical_rank_c, spectral_norm, to_complex,
};
use crate::error::Result;

/// A group of numerically coincident eigenvalues treated as one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    /// Mean of the clustered eigenvalues.
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    /// Size of the largest Jordan block.
    pub max_block: usize,
}

impl EigenCluster {
    pub fn defect(&self) -> usize {
        self.algebraic - self.geometric
    }
}

/// Spectral summary of a drift matrix.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub clusters: Vec<EigenCluster>,
    /// Spectral gap: smallest real part.
    pub mu: f64,
    /// Eigenvalues with real part `mu`, repeated by algebraic multiplicity.
    pub r_mu: Vec<Complex64>,
    /// Maximal defect among `r_mu`: the largest Jordan block there has size `n + 1`.
    pub n: usize,
    /// Grid estimate of the constant in `||e^{-Ct}|| <= c̃ (1 + t^n) e^{-μt}`,
    /// floored at 1.
    pub c_tilde: f64,
    /// Grid estimate of the constant in `||e^{-Ct} e^{-C^T t}|| <= ĉ (1 + t^{2n}) e^{-2μt}`.
    pub c_hat: f64,
}

/// Safety factor applied to grid-sampled envelope constants.
pub const ENVELOPE_SAFETY: f64 = 1.1;

impl SpectralData {
    /// `(1 + t^n) e^{-μ t}`.
    pub fn envelope(&self, t: f64) -> f64 {
        (1.0 + t.powi(self.n as i32)) * (-self.mu * t).exp()
    }

    /// `(1 + t^{2n}) e^{-2μ t}`.
    pub fn squared_envelope(&self, t: f64) -> f64 {
        (1.0 + t.powi(2 * self.n as i32)) * (-2.0 * self.mu * t).exp()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.clusters
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.value, c.algebraic))
            .collect()
    }
}

/// Radius within which eigenvalues are merged before Jordan analysis.
///
/// A Jordan block of size `k` splits under round-off by about `eps^{1/k}`, so
/// the radius is at least `10 eps^{1/d}` in addition to `1e3 tol`.
pub fn cluster_radius(dim: usize, tolerance: f64, scale: f64) -> f64 {
    let split = 10.0 * f64::EPSILON.powf(1.0 / dim.max(1) as f64);
    (1e3 * tolerance).max(if dim > 1 { split } else { 0.0 }) * scale.max(1.0)
}

/// μ, R_μ, maximal defect n, and envelope constants for a drift matrix.
pub fn analyze_drift_spectrum(c: &DMatrix<f64>, tolerance: f64) -> Result<SpectralData> {
    let d = ensure_square(c, "C")?;
    ensure_finite(c, "C")?;
    let scale = spectral_norm(c).max(1.0);
    let radius = cluster_radius(d, tolerance, scale);

    let raw: Vec<Complex64> = c.complex_eigenvalues().iter().copied().collect();
    let groups = single_link_clusters(&raw, radius);

    let cc = to_complex(c);
    let rank_tol = tolerance.max(radius / scale);
    let mut clusters = Vec::with_capacity(groups.len());
    for g in groups {
        let value = g.iter().sum::<Complex64>() / g.len() as f64;
        let algebraic = g.len();
        let shifted = &cc - DMatrix::<Complex64>::identity(d, d) * value;
        let geometric = d - numerical_rank_c(&shifted, rank_tol * scale);
        let mut power = shifted.clone();
        let mut max_block = 1;
        for k in 1..=d {
            let r = numerical_rank_c(&power, rank_tol * scale.powi(k as i32));
            if r <= d - algebraic {
                max_block = k;
                break;
            }
            max_block = k + 1;
            power = &power * &shifted;
        }
        clusters.push(EigenCluster {
            value,
            algebraic,
            geometric: geometric.clamp(1, algebraic),
            max_block: max_block.min(algebraic),
        });
    }
    clusters.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });

    let mu = clusters
        .iter()
        .map(|c| c.value.re)
        .fold(f64::INFINITY, f64::min);
    let gap_members: Vec<&EigenCluster> = clusters
        .iter()
        .filter(|c| (c.value.re - mu).abs() <= radius)
        .collect();
    let r_mu: Vec<Complex64> = gap_members
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.value, c.algebraic))
        .collect();
    let n = gap_members
        .iter()
        .map(|c| c.max_block - 1)
        .max()
        .unwrap_or(0);

    let mut data = SpectralData {
        clusters,
        mu,
        r_mu,
        n,
        c_tilde: f64::INFINITY,
        c_hat: f64::INFINITY,
    };
    if mu > 0.0 {
        let (ct, ch) = sample_envelope_constants(c, &data, 50.0 / mu, 2000)?;
        data.c_tilde = (ENVELOPE_SAFETY * ct).max(1.0);
        data.c_hat = (ENVELOPE_SAFETY * ch).max(1.0);
    }
    Ok(data)
}

/// Log-spaced time grid on `[0, t_max]` starting with 0.
pub fn log_time_grid(t_max: f64, samples: usize) -> Vec<f64> {
    let t_min: f64 = t_max * 1e-5;
    let mut ts = vec![0.0];
    let ratio = (t_max / t_min).ln();
    for i in 0..samples {
        ts.push(t_min * (ratio * i as f64 / (samples - 1).max(1) as f64).exp());
    }
    ts
}

/// Unscaled suprema of `||e^{-Ct}|| / ((1+t^n)e^{-μt})` and
/// `||e^{-Ct}e^{-C^T t}|| / ((1+t^{2n})e^{-2μt})` over a log-spaced grid.
pub fn sample_envelope_constants(
    c: &DMatrix<f64>,
    spec: &SpectralData,
    t_max: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    let mut sup1: f64 = 0.0;
    let mut sup2: f64 = 0.0;
    for t in log_time_grid(t_max, samples) {
        let e = matrix_exponential(c, -t)?;
        sup1 = sup1.max(spectral_norm(&e) / spec.envelope(t));
        sup2 = sup2.max(spectral_norm(&(&e * e.transpose())) / spec.squared_envelope(t));
    }
    Ok((sup1, sup2))
}

fn single_link_clusters(values: &[Complex64], radius: f64) -> Vec<Vec<Complex64>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= radius {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let root = find(&mut label, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(*v),
            None => groups.push((root, vec![*v])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, rows, v)
    }

    /// Brute-force rank of (C - λI)^k via Gaussian elimination with full
    /// pivoting on the real 2d x 2d representation of the complex matrix.
    fn brute_rank(c: &DMatrix<f64>, lambda: Complex64, k: usize) -> usize {
        let d = c.nrows();
        let mut a = DMatrix::<f64>::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let z = c[(i, j)] - if i == j { lambda.re } else { 0.0 };
                let w = if i == j { -lambda.im } else { 0.0 };
                a[(i, j)] = z;
                a[(i + d, j + d)] = z;
                a[(i, j + d)] = -w;
                a[(i + d, j)] = w;
            }
        }
        let mut p = DMatrix::<f64>::identity(2 * d, 2 * d);
        for _ in 0..k {
            p = &p * &a;
        }
        let n = 2 * d;
        let mut r = 0;
        let mut mat = p;
        let scale = mat.abs().max().max(1.0);
        for col in 0..n {
            let mut best = (0, 0, 0.0);
            for i in r..n {
                for j in col..n {
                    if mat[(i, j)].abs() > best.2 {
                        best = (i, j, mat[(i, j)].abs());
                    }
                }
            }
            if best.2 <= 1e-7 * scale {
                break;
            }
            mat.swap_rows(r, best.0);
            mat.swap_columns(col, best.1);
            for i in (r + 1)..n {
                let f = mat[(i, col)] / mat[(r, col)];
                for j in col..n {
                    mat[(i, j)] -= f * mat[(r, j)];
                }
            }
            r += 1;
        }
        // Complex rank is half the real rank.
        r / 2
    }

    fn brute_defect(c: &DMatrix<f64>, lambda: Complex64, alg: usize) -> usize {
        let d = c.nrows();
        for k in 1..=d {
            if brute_rank(c, lambda, k) == d - alg {
                return k - 1;
            }
        }
        d
    }

    #[test]
    fn identity_spectrum() {
        let s = analyze_drift_spectrum(&DMatrix::identity(2, 2), 1e-9).unwrap();
        assert_relative_eq!(s.mu, 1.0, epsilon = 1e-14);
        assert_eq!(s.n, 0);
        assert_eq!(s.r_mu.len(), 2);
        assert!(s.c_tilde >= 1.0);
    }

    #[test]
    fn jordan_block_defect_one() {
        let c = m(2, &[1.0, 1.0, 0.0, 1.0]);
        let s = analyze_drift_spectrum(&c, 1e-9).unwrap();
        assert_relative_eq!(s.mu, 1.0, epsilon = 1e-9);
        assert_eq!(s.n, 1);
        assert_eq!(brute_defect(&c, Complex64::new(1.0, 0.0), 2), 1);
    }

    #[test]
    fn diagonal_distinct() {
        let s = analyze_drift_spectrum(&m(2, &[1.0, 0.0, 0.0, 2.0]), 1e-9).unwrap();
        assert_relative_eq!(s.mu, 1.0, epsilon = 1e-14);
        assert_eq!(s.n, 0);
        assert_eq!(s.r_mu.len(), 1);
    }

    #[test]
    fn complex_pair_on_gap() {
        let c = m(2, &[1.0, 2.0, -2.0, 1.0]);
        let s = analyze_drift_spectrum(&c, 1e-9).unwrap();
        assert_relative_eq!(s.mu, 1.0, epsilon = 1e-12);
        assert_eq!(s.r_mu.len(), 2);
        assert_eq!(s.n, 0);
    }

    #[test]
    fn size_three_block_in_rotated_basis() {
        let j = m(3, &[2.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 2.0]);
        let q = m(3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, 0.0, -0.5, 1.0]);
        let c = &q * &j * q.clone().try_inverse().unwrap();
        let s = analyze_drift_spectrum(&c, 1e-9).unwrap();
        assert_eq!(s.n, 2);
        assert_relative_eq!(s.mu, 2.0, epsilon = 1e-6);
        assert_eq!(brute_defect(&j, Complex64::new(2.0, 0.0), 3), 2);
    }

    #[test]
    fn defect_agrees_with_brute_force_scan() {
        let cases = [
            m(2, &[1.0, 1.0, 0.0, 1.0]),
            m(2, &[1.0, 0.0, 0.0, 1.0]),
            m(3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            m(3, &[1.0, 0.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0, 3.0]),
            m(3, &[3.0, 1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 1.0]),
        ];
        for c in &cases {
            let s = analyze_drift_spectrum(c, 1e-9).unwrap();
            for cl in &s.clusters {
                let exact = Complex64::new(cl.value.re.round(), cl.value.im.round());
                assert_eq!(
                    cl.max_block - 1,
                    brute_defect(c, exact, cl.algebraic),
                    "cluster {cl:?} of {c}"
                );
            }
        }
    }

    #[test]
    fn envelope_holds_on_dense_grid() {
        for c in [
            m(2, &[1.0, 1.0, 0.0, 1.0]),
            m(2, &[1.0, 2.0, -2.0, 1.0]),
            m(3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
            m(2, &[1.0, 5.0, 0.0, 2.0]),
        ] {
            let s = analyze_drift_spectrum(&c, 1e-9).unwrap();
            let t_max = 100.0 / s.mu;
            for i in 0..=4000 {
                let t = t_max * i as f64 / 4000.0;
                let e = matrix_exponential(&c, -t).unwrap();
                assert!(
                    spectral_norm(&e) <= s.c_tilde * s.envelope(t) * (1.0 + 1e-12),
                    "t = {t}"
                );
            }
        }
    }
}
