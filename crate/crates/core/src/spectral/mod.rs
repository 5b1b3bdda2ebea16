//! Projection onto `V₁ = span{x_i f_∞}`, the split `f = f₁ + f₂`, and the
//! spectrum of the generator on each `V_m`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functionals::QuadratureGrid;
use crate::matrix::{analyze_drift_spectrum, matrix_exponential};
use crate::propagator::{build_generator_matrix, indices_of_degree, DensityState, HermiteExpansion};

/// `a_i = ⟨f, ξ_i⟩_{L²(f_∞⁻¹)} = ∫ x_i f`, with `ξ_i = x_i f_∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct V1Coefficients {
    pub a: DVector<f64>,
}

impl V1Coefficients {
    /// `|a| = ‖f₁‖_{L²(f_∞⁻¹)}`.
    pub fn norm(&self) -> f64 {
        self.a.norm()
    }

    /// `f₁ = Σ a_i ξ_i`.
    pub fn to_expansion(&self) -> Result<HermiteExpansion> {
        let d = self.a.len();
        let coeffs: Vec<_> = (0..d)
            .map(|i| {
                let mut alpha = vec![0u32; d];
                alpha[i] = 1;
                (alpha, self.a[i])
            })
            .collect();
        HermiteExpansion::new(d, 1, &coeffs)
    }
}

/// Exact first moments.
pub fn project_v1(f: &DensityState) -> V1Coefficients {
    V1Coefficients {
        a: f.first_moment(),
    }
}

/// First moments by quadrature of `∫ x_i (f/f_∞) f_∞`, used as a cross-check.
pub fn project_v1_quadrature(f: &DensityState, grid: &QuadratureGrid) -> Result<V1Coefficients> {
    let d = grid.dim();
    let v = grid.try_integrate_many(d, |x, out| {
        let r = f.ratio(x);
        for i in 0..d {
            out[i] = x[i] * r;
        }
        Ok(())
    })?;
    Ok(V1Coefficients {
        a: DVector::from_vec(v),
    })
}

/// `f = f₁ + f₂` with `f₁ = P_{V₁} f` and `f₂ = f − f₁` kept lazy.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub a: V1Coefficients,
    pub f1: HermiteExpansion,
    pub f2: DensityState,
}

pub fn decompose(f: &DensityState) -> Result<Decomposition> {
    let a = project_v1(f);
    let f1 = a.to_expansion()?;
    let f2 = f.minus(DensityState::Hermite(f1.clone()));
    Ok(Decomposition { a, f1, f2 })
}

impl Decomposition {
    /// `‖f₂ − m f_∞‖_{L²(f_∞⁻¹)}` with `m` the mass of `f`.
    pub fn norm_f2_minus_finf(&self, grid: &QuadratureGrid) -> f64 {
        let mass = self.f2.mass();
        grid.integrate(|x| (self.f2.ratio(x) - mass).powi(2)).sqrt()
    }
}

/// `a(t) = e^{−Ct} a(0)`.
pub fn evolve_v1(a0: &V1Coefficients, c: &DMatrix<f64>, t: f64) -> Result<V1Coefficients> {
    if t < 0.0 {
        return Err(Error::Parameter(format!("time {t} < 0")));
    }
    Ok(V1Coefficients {
        a: matrix_exponential(c, -t)? * &a0.a,
    })
}

/// Comparison of one degree block with `{−Σ α_i λ_i : |α| = m}`.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub m: usize,
    pub predicted: Vec<Complex64>,
    pub computed: Vec<Complex64>,
    /// Largest `|mean(matched computed) − predicted|` over distinct predicted values.
    pub max_mean_error: f64,
    /// Largest distance of an individual computed eigenvalue from its match.
    pub max_spread: f64,
    /// `min Re` of `−σ(L|V_m)`, which should equal `m μ`.
    pub min_real: f64,
    pub passes: bool,
}

#[derive(Debug, Clone)]
pub struct VmSpectrumReport {
    pub mu: f64,
    pub tolerance: f64,
    pub degree_one_is_minus_c: bool,
    pub blocks: Vec<BlockSpectrum>,
}

impl VmSpectrumReport {
    pub fn passes(&self) -> bool {
        self.degree_one_is_minus_c && self.blocks.iter().all(|b| b.passes)
    }
}

impl fmt::Display for VmSpectrumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "degree-1 block equals -C: {}", self.degree_one_is_minus_c)?;
        for b in &self.blocks {
            writeln!(
                f,
                "m={} size={} mean_error={:.3e} spread={:.3e} min_re={:.12} (m*mu={:.12}) {}",
                b.m,
                b.predicted.len(),
                b.max_mean_error,
                b.max_spread,
                b.min_real,
                b.m as f64 * self.mu,
                if b.passes { "ok" } else { "MISMATCH" }
            )?;
        }
        Ok(())
    }
}

/// Checks every degree block up to `max_degree` against the predicted
/// spectrum.
///
/// Eigenvalues of a defective block are perturbed by about `eps^{1/k}`, so
/// each distinct predicted value is compared with the mean of its `k`
/// nearest computed eigenvalues, which is well conditioned. Individual
/// deviations are reported as `max_spread`.
pub fn check_vm_spectrum(
    d_tilde: &DMatrix<f64>,
    c_tilde: &DMatrix<f64>,
    max_degree: usize,
    tolerance: f64,
) -> Result<VmSpectrumReport> {
    let dim = c_tilde.nrows();
    let spec = analyze_drift_spectrum(c_tilde, crate::matrix::DEFAULT_TOLERANCE)?;
    let lambdas = spec.eigenvalues();
    let g = build_generator_matrix(d_tilde, c_tilde, max_degree)?;

    let degree_one_is_minus_c = max_degree == 0
        || g.view((1, 1), (dim, dim)).into_owned() == -c_tilde;

    let mut blocks = Vec::new();
    let mut offset = 1;
    for m in 1..=max_degree {
        let alphas = indices_of_degree(dim, m);
        let n = alphas.len();
        let block = g.view((offset, offset), (n, n)).into_owned();
        offset += n;
        let computed: Vec<Complex64> = block.complex_eigenvalues().iter().copied().collect();
        let predicted: Vec<Complex64> = alphas
            .iter()
            .map(|a| -a.iter().zip(&lambdas).map(|(&k, l)| l * k as f64).sum::<Complex64>())
            .collect();
        let scale = predicted.iter().map(|z| z.norm()).fold(1.0, f64::max);

        // Distinct predicted values with multiplicities.
        let mut distinct: Vec<(Complex64, usize)> = Vec::new();
        for z in &predicted {
            match distinct
                .iter_mut()
                .find(|(v, _)| (*v - z).norm() <= 1e-9 * scale)
            {
                Some((_, k)) => *k += 1,
                None => distinct.push((*z, 1)),
            }
        }
        let mut pool = computed.clone();
        let mut max_mean_error: f64 = 0.0;
        let mut max_spread: f64 = 0.0;
        for (value, k) in &distinct {
            pool.sort_by(|a, b| (a - value).norm().total_cmp(&(b - value).norm()));
            let taken: Vec<Complex64> = pool.drain(..*k).collect();
            let mean = taken.iter().sum::<Complex64>() / *k as f64;
            max_mean_error = max_mean_error.max((mean - value).norm());
            for z in &taken {
                max_spread = max_spread.max((z - value).norm());
            }
        }
        let min_real = computed.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
        let min_real_mean = distinct
            .iter()
            .map(|(v, _)| -v.re)
            .fold(f64::INFINITY, f64::min);
        let passes = max_mean_error <= tolerance * scale
            && (min_real_mean - m as f64 * spec.mu).abs() <= tolerance * scale;
        blocks.push(BlockSpectrum {
            m,
            predicted,
            computed,
            max_mean_error,
            max_spread,
            min_real,
            passes,
        });
    }
    Ok(VmSpectrumReport {
        mu: spec.mu,
        tolerance,
        degree_one_is_minus_c,
        blocks,
    })
}

/// As [`check_vm_spectrum`], but errors with `SpectralMismatch` listing the
/// offending blocks.
pub fn require_vm_spectrum(
    d_tilde: &DMatrix<f64>,
    c_tilde: &DMatrix<f64>,
    max_degree: usize,
    tolerance: f64,
) -> Result<VmSpectrumReport> {
    let report = check_vm_spectrum(d_tilde, c_tilde, max_degree, tolerance)?;
    if !report.passes() {
        let bad: Vec<String> = report
            .blocks
            .iter()
            .filter(|b| !b.passes)
            .map(|b| format!("m={}: computed {:?}", b.m, b.computed))
            .collect();
        return Err(Error::SpectralMismatch(format!(
            "degree-1 block is -C: {}; {}",
            report.degree_one_is_minus_c,
            bad.join("; ")
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{normalize_system, FPSystem};
    use crate::propagator::{GaussianMixture, Propagator};
    use approx::assert_relative_eq;

    fn m(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, rows, v)
    }

    fn normalized(d: DMatrix<f64>, c: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let ns = normalize_system(&FPSystem::new(d, c, 1e-9).unwrap()).unwrap();
        (ns.d_tilde, ns.c_tilde)
    }

    #[test]
    fn projections() {
        let f = DensityState::Mixture(GaussianMixture::shifted(&[0.5, -0.25]));
        assert_eq!(project_v1(&f).a, DVector::from_vec(vec![0.5, -0.25]));
        let g = QuadratureGrid::new(2, 30).unwrap();
        assert_relative_eq!(project_v1_quadrature(&f, &g).unwrap().a, DVector::from_vec(vec![0.5, -0.25]), epsilon = 1e-13);
        let finf = DensityState::Mixture(GaussianMixture::standard(2));
        assert_eq!(project_v1(&finf).norm(), 0.0);
        let h = DensityState::Hermite(HermiteExpansion::from_unnormalized(2, 2, &[(vec![2, 0], 1.0)]).unwrap());
        assert_eq!(project_v1(&h).norm(), 0.0);
    }

    #[test]
    fn decomposition_of_linear_perturbation() {
        let f = DensityState::Hermite(
            HermiteExpansion::new(2, 1, &[(vec![0, 0], 1.0), (vec![1, 0], 0.3)]).unwrap(),
        );
        let dec = decompose(&f).unwrap();
        assert_eq!(dec.f1.coefficient(&[1, 0]), 0.3);
        let g = QuadratureGrid::new(2, 20).unwrap();
        assert!(dec.norm_f2_minus_finf(&g) < 1e-14);
    }

    #[test]
    fn decomposition_of_shifted_gaussian() {
        let f = DensityState::Mixture(GaussianMixture::shifted(&[0.5, 0.0]));
        let dec = decompose(&f).unwrap();
        assert_eq!(dec.a.a[0], 0.5);
        let g = QuadratureGrid::default_for(2).unwrap();
        let a2 = project_v1_quadrature(&dec.f2, &g).unwrap();
        assert!(a2.norm() < 1e-8);
        for i in 0..g.len() {
            let x = g.node(i);
            let sum = dec.f1.ratio_and_grad(x, &mut [0.0; 2]) + dec.f2.ratio(x);
            assert!((sum - f.ratio(x)).abs() <= 1e-10 * f.ratio(x).abs().max(1.0));
        }
    }

    #[test]
    fn v1_evolution() {
        let a0 = V1Coefficients { a: DVector::from_vec(vec![1.0, 0.0]) };
        let a = evolve_v1(&a0, &DMatrix::identity(2, 2), 1.0).unwrap();
        assert_relative_eq!(a.a[0], (-1.0f64).exp(), max_relative = 1e-14);
        let j = m(2, &[1.0, 1.0, 0.0, 1.0]);
        let a0 = V1Coefficients { a: DVector::from_vec(vec![0.0, 1.0]) };
        for t in [0.5, 3.0, 10.0] {
            let a = evolve_v1(&a0, &j, t).unwrap();
            // e^{-Jt} = e^{-t}[[1, -t], [0, 1]]
            assert_relative_eq!(a.a[0], -t * (-t).exp(), max_relative = 1e-12);
            assert_relative_eq!(a.a[1], (-t).exp(), max_relative = 1e-12);
        }
        let z = V1Coefficients { a: DVector::zeros(2) };
        assert_eq!(evolve_v1(&z, &j, 4.0).unwrap().norm(), 0.0);
    }

    #[test]
    fn flow_commutes_with_projection() {
        let (d, c) = normalized(DMatrix::identity(2, 2), m(2, &[1.0, 1.0, 0.0, 1.0]));
        let p = Propagator::from_matrices(d, c.clone());
        let f = DensityState::Mixture(GaussianMixture::gaussian(&[0.4, -0.3], DMatrix::identity(2, 2) * 0.7).unwrap());
        for t in [0.5, 1.0, 5.0] {
            let a1 = project_v1(&p.evolve(&f, t).unwrap());
            let a2 = evolve_v1(&project_v1(&f), &c, t).unwrap();
            assert_relative_eq!(a1.a, a2.a, epsilon = 1e-8);
        }
    }

    #[test]
    fn spectra_of_test_systems() {
        let diag = m(2, &[1.0, 0.0, 0.0, 2.0]);
        let r = require_vm_spectrum(&diag, &diag, 3, 1e-8).unwrap();
        let mut b2: Vec<f64> = r.blocks[1].computed.iter().map(|z| z.re).collect();
        b2.sort_by(|a, b| a.total_cmp(b));
        assert_relative_eq!(b2[0], -4.0, epsilon = 1e-12);
        assert_relative_eq!(b2[2], -2.0, epsilon = 1e-12);

        let i2 = DMatrix::identity(2, 2);
        let r = require_vm_spectrum(&i2, &i2, 3, 1e-8).unwrap();
        assert_eq!(r.blocks[2].computed.len(), 4);
        assert!(r.blocks[2].computed.iter().all(|z| (z.re + 3.0).abs() < 1e-12));

        let (d, c) = normalized(DMatrix::identity(2, 2), m(2, &[1.0, 1.0, 0.0, 1.0]));
        let r = require_vm_spectrum(&d, &c, 3, 1e-8).unwrap();
        assert!(r.degree_one_is_minus_c);
        for b in &r.blocks {
            assert_relative_eq!(b.min_real, b.m as f64, epsilon = 1e-3);
        }
    }

    #[test]
    fn complex_drift_spectrum() {
        let (d, c) = normalized(
            m(3, &[1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]),
            m(3, &[1.0, 2.0, 0.0, -2.0, 1.0, 0.5, 0.3, 0.0, 2.0]),
        );
        let r = require_vm_spectrum(&d, &c, 3, 1e-8).unwrap();
        assert!(r.passes());
    }
}
