use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::{
    ensure_finite, ensure_square, numerical_rank, solve_lyapunov, spd_sqrt, spectral_norm,
    sym_eigenvalues, symmetric_part,
};
use crate::error::{Error, Result};

/// Outcome of checking conditions (A)–(C) on a diffusion/drift pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub dim: usize,
    pub tolerance: f64,
    pub rank_d: usize,
    pub d_symmetric: bool,
    pub d_positive_semidefinite: bool,
    pub d_positive_definite: bool,
    pub positive_stable: bool,
    pub kalman_rank: usize,
    pub messages: Vec<String>,
}

impl ConditionReport {
    /// Conditions (A), (B) and (C) all hold.
    pub fn accepted(&self) -> bool {
        self.d_symmetric
            && self.d_positive_semidefinite
            && self.rank_d >= 1
            && self.positive_stable
            && self.kalman_rank == self.dim
    }

    /// Flat `key = value` block.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("dim = {}\n", self.dim));
        s.push_str(&format!("tolerance = {:e}\n", self.tolerance));
        s.push_str(&format!("rank_D = {}\n", self.rank_d));
        s.push_str(&format!("D_symmetric = {}\n", self.d_symmetric));
        s.push_str(&format!("D_positive_semidefinite = {}\n", self.d_positive_semidefinite));
        s.push_str(&format!("D_positive_definite = {}\n", self.d_positive_definite));
        s.push_str(&format!("positive_stable = {}\n", self.positive_stable));
        s.push_str(&format!("kalman_rank = {}\n", self.kalman_rank));
        s.push_str(&format!("accepted = {}\n", self.accepted()));
        for (i, m) in self.messages.iter().enumerate() {
            s.push_str(&format!("message_{i} = {m}\n"));
        }
        s
    }

    pub fn csv_header() -> &'static str {
        "dim,tolerance,rank_D,D_symmetric,D_positive_semidefinite,D_positive_definite,positive_stable,kalman_rank,accepted,messages"
    }

    /// One CSV row matching [`ConditionReport::csv_header`]; messages are
    /// joined with `|` and quoted.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:e},{},{},{},{},{},{},{},\"{}\"",
            self.dim,
            self.tolerance,
            self.rank_d,
            self.d_symmetric,
            self.d_positive_semidefinite,
            self.d_positive_definite,
            self.positive_stable,
            self.kalman_rank,
            self.accepted(),
            self.messages.join("|").replace('"', "'")
        )
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_value())
    }
}

/// Checks conditions (A)–(C) for the pair `(D, C)`.
///
/// Rank and definiteness decisions use `tolerance` relative to the largest
/// singular value of the matrix under test.
pub fn validate_system(
    d: &DMatrix<f64>,
    c: &DMatrix<f64>,
    tolerance: f64,
) -> Result<ConditionReport> {
    let n = ensure_square(d, "D")?;
    let nc = ensure_square(c, "C")?;
    if n != nc {
        return Err(Error::Dimension(format!("D is {n}x{n} but C is {nc}x{nc}")));
    }
    ensure_finite(d, "D")?;
    ensure_finite(c, "C")?;
    if !(tolerance >= 0.0) || !tolerance.is_finite() {
        return Err(Error::Parameter(format!("tolerance {tolerance} must be >= 0")));
    }

    let mut messages = Vec::new();
    let d_norm = spectral_norm(d);
    let asym = (d - d.transpose()).norm();
    let d_symmetric = asym <= tolerance * d_norm.max(f64::MIN_POSITIVE);
    if !d_symmetric {
        messages.push(format!("D is not symmetric: ||D - D^T|| = {asym:.3e}"));
    }

    let d_eigs = sym_eigenvalues(d);
    let min_eig = d_eigs.first().copied().unwrap_or(0.0);
    let d_psd = min_eig >= -tolerance * d_norm.max(1.0);
    if !d_psd {
        messages.push(format!("D has negative eigenvalue {min_eig:.6e}"));
    }
    let rank_d = d_eigs.iter().filter(|&&v| v > tolerance * d_norm).count();
    let d_positive_definite = d_psd && rank_d == n;
    if rank_d == 0 {
        messages.push("D is zero (condition (A) requires rank >= 1)".into());
    } else if rank_d < n {
        messages.push(format!("D is degenerate: rank {rank_d} < {n}"));
    }

    let eig = c.complex_eigenvalues();
    let positive_stable = eig.iter().all(|z| z.re > tolerance);
    if !positive_stable {
        let worst = eig
            .iter()
            .min_by(|a, b| a.re.total_cmp(&b.re))
            .copied()
            .unwrap_or_default();
        messages.push(format!(
            "C is not positive stable: eigenvalue {:.6}{:+.6}i",
            worst.re, worst.im
        ));
    }

    let kalman_rank = kalman_rank(&symmetric_part(d), c, tolerance);
    if kalman_rank < n {
        messages.push(format!(
            "Kalman rank {kalman_rank} < {n}: ker(D) contains a C^T-invariant subspace"
        ));
    }

    Ok(ConditionReport {
        dim: n,
        tolerance,
        rank_d,
        d_symmetric,
        d_positive_semidefinite: d_psd,
        d_positive_definite,
        positive_stable,
        kalman_rank,
        messages,
    })
}

/// Rank of `[√D, C√D, …, C^{d-1}√D]`.
fn kalman_rank(d: &DMatrix<f64>, c: &DMatrix<f64>, tolerance: f64) -> usize {
    let n = d.nrows();
    let sqrt_d = spd_sqrt(d);
    let mut block = sqrt_d.clone();
    let mut k = DMatrix::<f64>::zeros(n, n * n);
    for j in 0..n {
        k.view_mut((0, j * n), (n, n)).copy_from(&block);
        block = c * block;
    }
    numerical_rank(&k, tolerance)
}

/// A validated diffusion/drift pair satisfying conditions (A)–(C).
#[derive(Debug, Clone)]
pub struct FPSystem {
    d: DMatrix<f64>,
    c: DMatrix<f64>,
    tolerance: f64,
    report: ConditionReport,
}

impl FPSystem {
    pub fn new(d: DMatrix<f64>, c: DMatrix<f64>, tolerance: f64) -> Result<Self> {
        let report = validate_system(&d, &c, tolerance)?;
        if !report.accepted() {
            return Err(Error::Precondition(format!(
                "system rejected: {}",
                report.messages.join("; ")
            )));
        }
        Ok(Self {
            d: symmetric_part(&d),
            c,
            tolerance,
            report,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn report(&self) -> &ConditionReport {
        &self.report
    }
}

/// The system in coordinates `y = T x` where the equilibrium is the standard
/// Gaussian, `D̃` is diagonal and `(C̃ + C̃^T)/2 = D̃`.
#[derive(Debug, Clone)]
pub struct NormalizedSystem {
    /// Change of variables `y = T x`.
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub d_tilde: DMatrix<f64>,
    pub c_tilde: DMatrix<f64>,
    /// Equilibrium covariance in the original coordinates.
    pub k: DMatrix<f64>,
    pub lyapunov_residual: f64,
}

impl NormalizedSystem {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Smallest diagonal entry of `D̃`.
    pub fn d_min(&self) -> f64 {
        self.d_tilde.diagonal().min()
    }

    pub fn map_point(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.t * x
    }

    pub fn map_covariance(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        symmetric_part(&(&self.t * cov * self.t.transpose()))
    }

    /// `||(C̃+C̃^T)/2 − D̃||`.
    pub fn symmetric_defect(&self) -> f64 {
        (symmetric_part(&self.c_tilde) - &self.d_tilde).norm()
    }

    /// Largest off-diagonal magnitude of `D̃`.
    pub fn off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.d_tilde[(i, j)].abs());
                }
            }
        }
        m
    }
}

/// Builds the normalizing change of variables.
///
/// `T = R^T K^{-1/2}` where `R` diagonalizes `K^{-1/2} D K^{-1/2}`, so that
/// `T K T^T = I` and `D̃ = T D T^T` is diagonal (descending).
pub fn normalize_system(sys: &FPSystem) -> Result<NormalizedSystem> {
    let d = sys.diffusion();
    let c = sys.drift();
    let k = solve_lyapunov(d, c)?;
    let lyapunov_residual = (d * 2.0 - c * &k - &k * c.transpose()).norm();

    let k_sqrt = spd_sqrt(&k);
    let k_inv_sqrt = k_sqrt
        .clone()
        .try_inverse()
        .ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    let m = symmetric_part(&(&k_inv_sqrt * d * &k_inv_sqrt));
    let eig = m.symmetric_eigen();
    let n = sys.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut r = DMatrix::<f64>::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        r.set_column(col, &eig.eigenvectors.column(idx));
    }

    let t = r.transpose() * &k_inv_sqrt;
    let sv = t.singular_values();
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > 1.0 / (f64::EPSILON * 1e3) {
        return Err(Error::Conditioning { condition });
    }
    let t_inv = &k_sqrt * &r;
    let mut d_tilde = symmetric_part(&(&t * d * t.transpose()));
    // Off-diagonals are round-off by construction.
    for i in 0..n {
        for j in 0..n {
            if i != j && d_tilde[(i, j)].abs() <= 1e-12 * d_tilde.abs().max() {
                d_tilde[(i, j)] = 0.0;
            }
        }
    }
    let c_tilde = &t * c * &t_inv;

    Ok(NormalizedSystem {
        t,
        t_inv,
        d_tilde,
        c_tilde,
        k,
        lyapunov_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, rows, v)
    }

    #[test]
    fn identity_report() {
        let i = DMatrix::<f64>::identity(2, 2);
        let r = validate_system(&i, &i, 1e-9).unwrap();
        assert_eq!(r.rank_d, 2);
        assert!(r.positive_stable);
        assert_eq!(r.kalman_rank, 2);
        assert!(r.accepted());
    }

    #[test]
    fn degenerate_diffusion_with_hypocoercive_drift() {
        let r = validate_system(&m(2, &[1.0, 0.0, 0.0, 0.0]), &m(2, &[1.0, 1.0, -1.0, 0.0]), 1e-9)
            .unwrap();
        assert_eq!(r.rank_d, 1);
        assert!(r.positive_stable);
        assert_eq!(r.kalman_rank, 2);
        assert!(r.accepted());
        assert!(!r.d_positive_definite);
    }

    #[test]
    fn unstable_drift_rejected() {
        let r = validate_system(&DMatrix::identity(2, 2), &m(2, &[-1.0, 0.0, 0.0, 1.0]), 1e-9)
            .unwrap();
        assert!(!r.positive_stable);
        assert!(!r.accepted());
    }

    #[test]
    fn invariant_kernel_subspace_rejected() {
        // ker D = span(e2) and C^T e2 = e2.
        let r = validate_system(&m(2, &[1.0, 0.0, 0.0, 0.0]), &DMatrix::identity(2, 2), 1e-9)
            .unwrap();
        assert_eq!(r.kalman_rank, 1);
        assert!(!r.accepted());
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let d = DMatrix::<f64>::identity(2, 2);
        let c3 = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(validate_system(&d, &c3, 1e-9), Err(Error::Dimension(_))));
        let nonsq = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(validate_system(&nonsq, &d, 1e-9), Err(Error::Dimension(_))));
        let mut bad = d.clone();
        bad[(0, 1)] = f64::INFINITY;
        assert!(matches!(validate_system(&bad, &d, 1e-9), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn serialization_is_flat() {
        let i = DMatrix::<f64>::identity(2, 2);
        let r = validate_system(&i, &i, 1e-9).unwrap();
        let kv = r.to_key_value();
        assert!(kv.contains("rank_D = 2\n"));
        assert!(kv.contains("accepted = true\n"));
        let row = r.to_csv_row();
        assert_eq!(
            row.split(',').count(),
            ConditionReport::csv_header().split(',').count()
        );
    }

    fn check_invariants(ns: &NormalizedSystem, sys: &FPSystem) {
        assert!(ns.symmetric_defect() <= 1e-8, "C_s != D: {}", ns.symmetric_defect());
        assert!(ns.off_diagonal() <= 1e-8);
        let k_tilde = ns.map_covariance(&ns.k);
        assert_relative_eq!(k_tilde, DMatrix::identity(ns.dim(), ns.dim()), epsilon = 1e-10);
        assert!(ns.lyapunov_residual <= 1e-10 * sys.diffusion().norm().max(1.0));
        let mut a: Vec<(f64, f64)> = sys.drift().complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        let mut b: Vec<(f64, f64)> = ns.c_tilde.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.0 - y.0).abs() < 1e-6 && (x.1 - y.1).abs() < 1e-6, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn normalize_identity() {
        let i = DMatrix::<f64>::identity(2, 2);
        let sys = FPSystem::new(i.clone(), i.clone(), 1e-9).unwrap();
        let ns = normalize_system(&sys).unwrap();
        assert_relative_eq!(ns.d_tilde, i, epsilon = 1e-14);
        assert_relative_eq!(ns.c_tilde, i, epsilon = 1e-14);
        assert_relative_eq!(ns.t.abs(), i, epsilon = 1e-14);
        check_invariants(&ns, &sys);
    }

    #[test]
    fn normalize_scalar() {
        let sys = FPSystem::new(m(1, &[2.0]), m(1, &[4.0]), 1e-9).unwrap();
        let ns = normalize_system(&sys).unwrap();
        assert_relative_eq!(ns.d_tilde[(0, 0)], 4.0, epsilon = 1e-13);
        assert_relative_eq!(ns.c_tilde[(0, 0)], 4.0, epsilon = 1e-13);
        assert_relative_eq!(ns.t[(0, 0)].abs(), 1.0 / 0.5f64.sqrt(), epsilon = 1e-13);
        check_invariants(&ns, &sys);
    }

    #[test]
    fn normalize_jordan() {
        let sys = FPSystem::new(DMatrix::identity(2, 2), m(2, &[1.0, 1.0, 0.0, 1.0]), 1e-9).unwrap();
        let ns = normalize_system(&sys).unwrap();
        check_invariants(&ns, &sys);
        let spec = crate::matrix::analyze_drift_spectrum(&ns.c_tilde, 1e-9).unwrap();
        assert_eq!(spec.n, 1);
    }

    #[test]
    fn normalize_degenerate() {
        let sys = FPSystem::new(m(2, &[1.0, 0.0, 0.0, 0.0]), m(2, &[1.0, 1.0, -1.0, 0.0]), 1e-9)
            .unwrap();
        let ns = normalize_system(&sys).unwrap();
        check_invariants(&ns, &sys);
        assert!(ns.d_tilde[(1, 1)].abs() < 1e-12);
    }
}
