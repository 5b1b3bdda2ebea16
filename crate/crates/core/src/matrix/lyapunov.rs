//! Continuous Lyapunov equations by Bartels–Stewart on the complex Schur form.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::{ensure_finite, ensure_square, symmetric_part, to_complex};
use crate::error::{Error, Result};

/// Solves `A X + X A^T = Q` for real `A`, `Q`.
///
/// A unique solution exists iff no two eigenvalues of `A` sum to zero; the
/// solver reports `NoUniqueSolution` when a pivot `t_ii + conj(t_jj)` falls
/// below `1e-12 * max(1, ||A||)`.
pub fn solve_stein_like(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = ensure_square(a, "A")?;
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "right-hand side is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(q, "Q")?;

    let schur = Schur::try_new(to_complex(a), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NoUniqueSolution("Schur iteration did not converge".into()))?;
    let (u, t) = schur.unpack();
    let f = u.adjoint() * to_complex(q) * &u;

    let scale = a.abs().max().max(1.0);
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut rhs = f[(i, j)];
            for k in (i + 1)..n {
                rhs -= t[(i, k)] * y[(k, j)];
            }
            for l in (j + 1)..n {
                rhs -= y[(i, l)] * t[(j, l)].conj();
            }
            let pivot = t[(i, i)] + t[(j, j)].conj();
            if pivot.norm() <= 1e-12 * scale {
                return Err(Error::NoUniqueSolution(format!(
                    "eigenvalues {} and {} sum to (almost) zero",
                    t[(i, i)],
                    t[(j, j)]
                )));
            }
            y[(i, j)] = rhs / pivot;
        }
    }
    let x = &u * y * u.adjoint();
    Ok(x.map(|z| z.re))
}

/// Equilibrium covariance: the solution `K` of `2D = C K + K C^T`.
///
/// Requires `C` positive stable; the result is symmetrized.
pub fn solve_lyapunov(d: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(c, "C")?;
    ensure_finite(c, "C")?;
    let eig = c.complex_eigenvalues();
    if let Some(bad) = eig.iter().find(|z| z.re <= 0.0) {
        return Err(Error::NoUniqueSolution(format!(
            "C is not positive stable (eigenvalue {bad})"
        )));
    }
    let k = solve_stein_like(c, &(d * 2.0))?;
    Ok(symmetric_part(&k))
}
