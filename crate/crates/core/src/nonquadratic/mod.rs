//! Scalar position-dependent diffusion `D(x)·I` with potential `φ`:
//! the pointwise rate condition on `(φ, D)` and a 1-D finite-volume solver
//! for checking generalized Fisher decay.

mod expr;
mod fp1d;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use expr::{Expr, Func};
pub use fp1d::{
    verify_generalized_fisher_decay_1d, DecayReport1d, Fp1dGrid, Fp1dSolution, FpSolver,
    FpSolverOptions, DECAY_SLACK, NEAR_VACUUM_RATIO,
};

use crate::error::{Error, Result};
use crate::parallel;
use crate::verifier::box_grid;

/// Default truncation half-width of the computational domain.
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
/// Largest admissible relative tail mass of `e^{−φ}` outside the domain.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Variable names accepted in expressions of dimension `d`.
pub fn variable_names(dim: usize) -> &'static [&'static str] {
    match dim {
        1 => &["x"],
        2 => &["x", "y"],
        _ => &["x", "y", "z"],
    }
}

/// A scalar function with symbolic gradient and Hessian.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub expr: Expr,
    pub grad: Vec<Expr>,
    pub hess: Vec<Vec<Expr>>,
}

impl ScalarField {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        if let Some(v) = expr.max_var() {
            if v >= dim {
                return Err(Error::Dimension(format!(
                    "expression uses variable {} in dimension {dim}",
                    v + 1
                )));
            }
        }
        let grad: Vec<Expr> = (0..dim).map(|i| expr.diff(i)).collect();
        let hess = grad
            .iter()
            .map(|g| (0..dim).map(|j| g.diff(j)).collect())
            .collect();
        Ok(ScalarField { expr, grad, hess })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        ScalarField::new(Expr::parse(src, variable_names(dim))?, dim)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.grad.len(), self.grad.iter().map(|g| g.eval(x)))
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.grad.len();
        DMatrix::from_fn(d, d, |i, j| self.hess[i][j].eval(x))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Dimension(format!("dimension must be 1, 2 or 3, got {dim}")))
    }
}

/// `∂_t f = div(D(x)(∇f + f∇φ))` on the box `[−L, L]^d`.
#[derive(Debug, Clone)]
pub struct ScalarDiffusionProblem {
    pub dim: usize,
    pub phi: ScalarField,
    pub diffusion: ScalarField,
    pub half_width: f64,
    /// Grid points per axis of the rate-condition scan.
    pub a1_points: usize,
}

impl ScalarDiffusionProblem {
    pub fn new(dim: usize, phi: ScalarField, diffusion: ScalarField) -> Result<Self> {
        check_dim(dim)?;
        if phi.grad.len() != dim || diffusion.grad.len() != dim {
            return Err(Error::Dimension("field dimensions do not match the problem".into()));
        }
        let a1_points = match dim {
            1 => 4001,
            2 => 201,
            _ => 41,
        };
        Ok(ScalarDiffusionProblem {
            dim,
            phi,
            diffusion,
            half_width: DEFAULT_HALF_WIDTH,
            a1_points,
        })
    }

    /// Parses `φ` and `D` from expression strings.
    pub fn parse(dim: usize, phi: &str, diffusion: &str) -> Result<Self> {
        ScalarDiffusionProblem::new(dim, ScalarField::parse(phi, dim)?, ScalarField::parse(diffusion, dim)?)
    }

    pub fn with_half_width(mut self, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Parameter(format!("half width {half_width} must be > 0")));
        }
        self.half_width = half_width;
        Ok(self)
    }

    pub fn with_a1_points(mut self, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Parameter("rate scan needs two or more points per axis".into()));
        }
        self.a1_points = points;
        Ok(self)
    }

    /// Left-hand matrix of the rate condition at `x`.
    pub fn a1_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.dim;
        let dv = self.diffusion.value(x);
        if !(dv > 0.0 && dv.is_finite()) {
            return Err(Error::Domain(format!("D(x) = {dv} is not positive at x = {x:?}")));
        }
        let gd = self.diffusion.gradient(x);
        let hd = self.diffusion.hessian(x);
        let gp = self.phi.gradient(x);
        let hp = self.phi.hessian(x);
        let cross = &gp * gd.transpose();
        let shift = 0.5 * (hd.trace() - gd.dot(&gp));
        let m = (0.5 - d as f64 / 4.0) / dv * &gd * gd.transpose()
            + DMatrix::from_diagonal_element(d, d, shift)
            + dv * hp
            + 0.5 * (&cross + cross.transpose())
            - hd;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite rate matrix at x = {x:?}")));
        }
        Ok(m)
    }

    /// Relative mass of `e^{−φ}` outside `[−L, L]` in one dimension, from a
    /// midpoint rule on `[−2L, 2L]`.
    pub fn tail_mass_1d(&self) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::Dimension("tail mass is computed in one dimension".into()));
        }
        let n = 8192;
        let l = self.half_width;
        let h = 4.0 * l / n as f64;
        let xs: Vec<f64> = (0..n).map(|k| -2.0 * l + (k as f64 + 0.5) * h).collect();
        let phis: Vec<f64> = xs.iter().map(|x| self.phi.value(&[*x])).collect();
        let min = phis
            .iter()
            .zip(&xs)
            .filter(|(_, x)| x.abs() <= l)
            .map(|(p, _)| *p)
            .fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::Domain("potential is not finite on the domain".into()));
        }
        let (mut inside, mut outside) = (0.0, 0.0);
        for (x, p) in xs.iter().zip(&phis) {
            let w = (min - p).exp();
            if x.abs() <= l {
                inside += w;
            } else {
                outside += w;
            }
        }
        Ok(outside / (inside + outside))
    }
}

/// Result of the pointwise rate scan.
#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    /// Grid minimum of the smallest eigenvalue; `≤ 0` means no certificate.
    pub lambda1: f64,
    pub worst_point: Vec<f64>,
    pub points_per_axis: usize,
    pub half_width: f64,
}

impl A1Report {
    pub fn certified(&self) -> bool {
        self.lambda1 > 0.0
    }
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Scans the rate matrix on the problem's grid.
pub fn check_condition_a1(prob: &ScalarDiffusionProblem) -> Result<A1Report> {
    check_condition_a1_on(prob, prob.a1_points)
}

/// Scans the rate matrix on a uniform grid with `points` per axis.
pub fn check_condition_a1_on(prob: &ScalarDiffusionProblem, points: usize) -> Result<A1Report> {
    if points < 2 {
        return Err(Error::Parameter("rate scan needs two or more points per axis".into()));
    }
    let grid = box_grid(prob.dim, points, prob.half_width);
    let values = parallel::map_slice(&grid, |x| prob.a1_matrix(x).map(min_eigenvalue));
    let mut best = (f64::INFINITY, 0usize);
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        if v < best.0 {
            best = (v, k);
        }
    }
    Ok(A1Report {
        lambda1: best.0,
        worst_point: grid[best.1].clone(),
        points_per_axis: points,
        half_width: prob.half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_potential_unit_diffusion() {
        for d in 1..=3 {
            let phi = match d {
                1 => "x^2/2",
                2 => "(x^2 + y^2)/2",
                _ => "(x^2 + y^2 + z^2)/2",
            };
            let prob = ScalarDiffusionProblem::parse(d, phi, "1").unwrap().with_a1_points(9).unwrap();
            let r = check_condition_a1(&prob).unwrap();
            assert_eq!(r.lambda1, 1.0);
        }
        let prob = ScalarDiffusionProblem::parse(1, "x^2/2", "3").unwrap();
        assert_eq!(check_condition_a1(&prob).unwrap().lambda1, 3.0);
    }

    #[test]
    fn one_dimensional_form() {
        // In d = 1 the matrix reduces to D'^2/(4D) − D''/2 + D'φ'/2 + Dφ''.
        let prob = ScalarDiffusionProblem::parse(1, "x^2/2 + 0.1*x^4", "1 + 0.2/(1+x^2)").unwrap();
        for &x in &[-3.0, -0.4, 0.0, 1.3, 5.0] {
            let s: f64 = 1.0 + x * x;
            let d = 1.0 + 0.2 / s;
            let d1 = -0.4 * x / (s * s);
            let d2 = -0.4 / (s * s) + 1.6 * x * x / (s * s * s);
            let p1 = x + 0.4 * x * x * x;
            let p2 = 1.0 + 1.2 * x * x;
            let expected = d1 * d1 / (4.0 * d) - d2 / 2.0 + d1 * p1 / 2.0 + d * p2;
            assert_relative_eq!(prob.a1_matrix(&[x]).unwrap()[(0, 0)], expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn perturbed_diffusion_refines() {
        let prob = ScalarDiffusionProblem::parse(1, "x^2/2 + 0.1*x^4", "1 + 0.2/(1+x^2)").unwrap();
        let coarse = check_condition_a1(&prob).unwrap();
        let fine = check_condition_a1_on(&prob, 10 * (prob.a1_points - 1) + 1).unwrap();
        assert!(coarse.lambda1 > 0.0);
        assert!(fine.lambda1 <= coarse.lambda1);
        assert!((coarse.lambda1 - fine.lambda1).abs() < 1e-4);
    }

    #[test]
    fn nonpositive_diffusion_is_a_domain_error() {
        let prob = ScalarDiffusionProblem::parse(1, "x^2/2", "x").unwrap();
        assert!(matches!(check_condition_a1(&prob), Err(Error::Domain(_))));
    }

    #[test]
    fn two_dimensional_cross_terms() {
        // φ = |x|²/2, D = 1 + x/10: ∇D = (0.1, 0), HD = 0, d = 2 so the
        // outer-product term vanishes.
        let prob = ScalarDiffusionProblem::parse(2, "(x^2+y^2)/2", "2 + x/10").unwrap();
        let m = prob.a1_matrix(&[1.0, 2.0]).unwrap();
        let d = 2.1;
        let shift = -0.5 * 0.1;
        assert_relative_eq!(m[(0, 0)], shift + d + 0.1, epsilon = 1e-14);
        assert_relative_eq!(m[(1, 1)], shift + d, epsilon = 1e-14);
        assert_relative_eq!(m[(0, 1)], 0.1, epsilon = 1e-14);
    }

    #[test]
    fn tail_mass_of_gaussian() {
        let prob = ScalarDiffusionProblem::parse(1, "x^2/2", "1").unwrap();
        assert!(prob.tail_mass_1d().unwrap() < 1e-14);
        let wide = ScalarDiffusionProblem::parse(1, "x^2/20", "1").unwrap();
        assert!(wide.tail_mass_1d().unwrap() > TAIL_TOLERANCE);
    }
}
