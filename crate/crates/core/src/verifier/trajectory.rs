//! Exact trajectories sampled on a time grid with every functional the
//! checks need, evaluated in one quadrature pass per time.

use nalgebra::DMatrix;

use super::bounds::{entropy_factor, BoundsBundle};
use crate::error::{Error, Result};
use crate::functionals::{
    check_resolution, entropy_p_abs, exponential_moment, moment_exponent, PEntropy,
    QuadratureGrid, RATIO_FLOOR,
};
use crate::matrix::{
    analyze_drift_spectrum, max_sym_eigenvalue, min_sym_eigenvalue, spd_sqrt, symmetric_part,
    NormalizedSystem, SpectralData, DEFAULT_TOLERANCE,
};
use crate::parallel;
use crate::propagator::{DensityState, Propagator};

/// Default `ε` and `η` used for the assembled theorem times.
pub const DEFAULT_EPS: f64 = 0.5;
pub const DEFAULT_ETA: f64 = 0.5;

/// Relative tolerance of the grid-doubling test.
pub const DEFAULT_RESOLUTION_TOL: f64 = 1e-6;

/// Negative ratios down to this are round-off for a non-negative `f`.
const NEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    pub p: f64,
    /// Fisher weight `P`, symmetric positive definite.
    pub pm: DMatrix<f64>,
    pub times: Vec<f64>,
    /// Points per axis; `None` uses the dimension default.
    pub grid_degree: Option<usize>,
    /// `None` skips the doubling test.
    pub resolution_tol: Option<f64>,
    pub parallel: bool,
    pub eps: f64,
    pub eta: f64,
}

impl TrajectoryOptions {
    pub fn new(p: f64, pm: DMatrix<f64>, times: Vec<f64>) -> Self {
        TrajectoryOptions {
            p,
            pm,
            times,
            grid_degree: None,
            resolution_tol: Some(DEFAULT_RESOLUTION_TOL),
            parallel: parallel::is_parallel(),
            eps: DEFAULT_EPS,
            eta: DEFAULT_ETA,
        }
    }
}

/// Bound values attached to a sample; `+∞` before the bound's time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBounds {
    /// `𝓘_p^P(f₀, g₀) e^{−2λt}`.
    pub fisher: f64,
    /// `(1 + t^{2n}) e^{−2μt}`.
    pub envelope: f64,
    /// `𝒜(p₂)[p₂(p₂−1)e_{p₂}(|g₀|)+1]^{2/p₂}` for `t ≥ t₁(p₂)`.
    pub l2: f64,
    /// `ℬ(p₂)[…]^{2/p₂}` for `t ≥ t₁(p₂)`.
    pub fisher2: f64,
}

/// Functionals of `(f(t), g(t))`. Divergent quantities are `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub e_p: f64,
    pub e_2: f64,
    /// `I_p^P(f)`.
    pub fisher_p: f64,
    /// `I_p^I(f)`.
    pub fisher_p_identity: f64,
    /// `𝓘_1^P(f, g)`.
    pub gen_fisher_1: f64,
    /// `𝓘_p^P(f, g)`.
    pub gen_fisher_p: f64,
    /// `I_2^P(g)`.
    pub fisher2_g: f64,
    /// `I_2^I(g)`.
    pub fisher2_g_identity: f64,
    /// `‖g‖²_{L²(f_∞⁻¹)}`.
    pub g_l2_sq: f64,
    /// `e_2(g)`.
    pub e2_g: f64,
    /// `I_2^P(f₂) = 𝓘_2^P(f, f₂)`.
    pub fisher2_f2: f64,
    /// `𝓘_p^P(f, f₁)`.
    pub gen_fisher_p_f1: f64,
    /// `𝓘_p^P(f, f₂)`.
    pub gen_fisher_p_f2: f64,
    /// V₁ coefficients `a(t)`.
    pub a: Vec<f64>,
    pub norm_f1: f64,
    pub norm_f2_minus_finf: f64,
    /// `∫ e^{ε|x|²} f` with `ε = (p−1)/(2(2p−1))`, or `1/6` for `p = 1`.
    pub exp_moment: f64,
    pub bounds: SampleBounds,
}

/// Geometric plus uniform grid on `[0, t_max]`, sorted and deduplicated.
pub fn default_time_grid(t_max: f64, samples: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max > 0.0) || samples < 4 {
        return Err(Error::Parameter(format!(
            "time grid needs t_max > 0 and >= 4 samples (got {t_max}, {samples})"
        )));
    }
    let nu = samples / 2;
    let ng = samples - nu;
    let mut t: Vec<f64> = (0..nu).map(|k| t_max * k as f64 / (nu - 1) as f64).collect();
    t.extend((0..ng).map(|j| t_max * 10f64.powf(-3.0 * (1.0 - j as f64 / ng as f64))));
    t.sort_by(|a, b| a.total_cmp(b));
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_max);
    Ok(t)
}

/// Largest `λ` with `CᵀP + PC ⪰ 2λP`: half the smallest eigenvalue of
/// `P^{−1/2}(CᵀP + PC)P^{−1/2}`.
pub fn certified_rate(c: &DMatrix<f64>, pm: &DMatrix<f64>) -> Result<f64> {
    check_weight(pm, c.nrows())?;
    let s = spd_sqrt(pm)
        .try_inverse()
        .ok_or_else(|| Error::Parameter("P is singular".into()))?;
    let m = &s * (c.transpose() * pm + pm * c) * &s;
    Ok(0.5 * min_sym_eigenvalue(&symmetric_part(&m)))
}

fn check_weight(pm: &DMatrix<f64>, d: usize) -> Result<()> {
    if pm.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "P is {}x{}, expected {d}x{d}",
            pm.nrows(),
            pm.ncols()
        )));
    }
    if (pm - pm.transpose()).amax() > 1e-12 * pm.amax().max(1.0) || min_sym_eigenvalue(pm) <= 0.0 {
        return Err(Error::Parameter("P must be symmetric positive definite".into()));
    }
    Ok(())
}

/// Largest covariance eigenvalue over all Gaussian components; a Hermite
/// expansion counts as variance 1.
fn max_variance(s: &DensityState) -> f64 {
    match s {
        DensityState::Mixture(m) => m
            .components()
            .iter()
            .map(|c| max_sym_eigenvalue(c.covariance()))
            .fold(0.0, f64::max),
        DensityState::Hermite(_) => 1.0,
        DensityState::Combination(parts) => {
            parts.iter().map(|(_, s)| max_variance(s)).fold(0.0, f64::max)
        }
    }
}

/// Whether `∫ |s/f_∞|^p f_∞ < ∞`: every variance below `p/(p−1)`.
pub fn lp_finite(s: &DensityState, p: f64) -> bool {
    p <= 1.0 || max_variance(s) < p / (p - 1.0) * (1.0 - 1e-12)
}

/// A sampled pair of solutions `(f(t), g(t))` with its functionals.
#[derive(Debug)]
pub struct Trajectory {
    pub p: f64,
    pub pm: DMatrix<f64>,
    pub propagator: Propagator,
    pub f0: DensityState,
    pub g0: DensityState,
    pub grid: QuadratureGrid,
    pub spectral: SpectralData,
    pub bounds: BoundsBundle,
    /// `λ` certified by `P` for the drift.
    pub lambda: f64,
    /// Smallest diagonal entry of `D̃`.
    pub d_min: f64,
    /// Exponent `p₂` used for the contractivity bound columns.
    pub p2: f64,
    pub parallel: bool,
    pub initial: Sample,
    pub samples: Vec<Sample>,
    /// Largest relative change seen in the doubling test.
    pub resolution_change: Option<f64>,
}

/// Runs `f0, g0` through the exact propagator of `ns` and evaluates every
/// functional at each time.
pub fn run_trajectory(
    ns: &NormalizedSystem,
    f0: &DensityState,
    g0: &DensityState,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    Trajectory::run(Propagator::new(ns), f0, g0, opts)
}

struct Pass<'a> {
    f: &'a DensityState,
    g: &'a DensityState,
    a: &'a [f64],
    mass: f64,
    f_l2: bool,
    f_lp: bool,
    g_l2: bool,
}

const N_OUT: usize = 14;

impl Trajectory {
    pub fn run(
        propagator: Propagator,
        f0: &DensityState,
        g0: &DensityState,
        opts: &TrajectoryOptions,
    ) -> Result<Trajectory> {
        let d = propagator.dim();
        PEntropy::new(opts.p)?;
        check_weight(&opts.pm, d)?;
        if f0.dim() != d || g0.dim() != d {
            return Err(Error::Dimension("initial data and system differ in dimension".into()));
        }
        if (f0.mass() - 1.0).abs() > 1e-10 {
            return Err(Error::Precondition(format!(
                "f0 must have unit mass, got {:.17e}",
                f0.mass()
            )));
        }
        if let Some(t) = opts.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Parameter(format!("sample time {t} must be finite and >= 0")));
        }
        let grid = match opts.grid_degree {
            Some(n) => QuadratureGrid::new(d, n)?,
            None => QuadratureGrid::default_for(d)?,
        };
        let spectral = analyze_drift_spectrum(propagator.drift(), DEFAULT_TOLERANCE)?;
        let p_max = max_sym_eigenvalue(&opts.pm);
        let bounds = BoundsBundle::new(d, &spectral, p_max, opts.eps, opts.eta)?;
        let lambda = certified_rate(propagator.drift(), &opts.pm)?;
        let d_min = propagator.diffusion().diagonal().min();
        let p2 = if opts.p > 1.0 { opts.p } else { 2.0 };

        let mut traj = Trajectory {
            p: opts.p,
            pm: opts.pm.clone(),
            propagator,
            f0: f0.clone(),
            g0: g0.clone(),
            grid,
            spectral,
            bounds,
            lambda,
            d_min,
            p2,
            parallel: opts.parallel,
            initial: empty_sample(),
            samples: Vec::new(),
            resolution_change: None,
        };

        traj.initial = traj.evaluate(0.0)?;
        if traj.initial.e_p.is_infinite() {
            return Err(Error::Precondition(format!("e_{}(f0) is infinite", opts.p)));
        }
        let e_g0 = if lp_finite(g0, p2) {
            entropy_p_abs(g0, p2, &traj.grid)?
        } else {
            f64::INFINITY
        };
        let factor = entropy_factor(p2, e_g0).powf(2.0 / p2);
        let l2_bound = traj.bounds.a_const(p2)? * factor;
        let fisher2_bound = traj.bounds.b_const(p2)? * factor;
        let t1 = traj.bounds.t1(p2)?;
        let fisher0 = traj.initial.gen_fisher_p;

        let eval = |t: &f64| traj.evaluate(*t);
        let results = if traj.parallel {
            parallel::map_slice(&opts.times, eval)
        } else {
            opts.times.iter().map(eval).collect()
        };
        let mut samples = results.into_iter().collect::<Result<Vec<_>>>()?;
        for s in samples.iter_mut() {
            s.bounds = SampleBounds {
                fisher: fisher0 * (-2.0 * traj.lambda * s.t).exp(),
                envelope: traj.spectral.squared_envelope(s.t),
                l2: if s.t >= t1 { l2_bound } else { f64::INFINITY },
                fisher2: if s.t >= t1 { fisher2_bound } else { f64::INFINITY },
            };
        }
        traj.samples = samples;

        if let (Some(tol), Some(first)) = (opts.resolution_tol, opts.times.first()) {
            traj.resolution_change = Some(traj.resolution_test(*first, tol)?);
        }
        Ok(traj)
    }

    pub fn dim(&self) -> usize {
        self.propagator.dim()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `(f(t), g(t))`.
    pub fn states_at(&self, t: f64) -> Result<(DensityState, DensityState)> {
        let cache = self.propagator.cache(t)?;
        Ok((
            self.propagator.evolve_cached(&self.f0, &cache)?,
            self.propagator.evolve_cached(&self.g0, &cache)?,
        ))
    }

    /// All functionals at `t` on the trajectory grid; bounds left at zero.
    pub fn evaluate(&self, t: f64) -> Result<Sample> {
        self.evaluate_on(t, &self.grid)
    }

    /// `𝓘_p^P(f(t), g(t))` alone.
    pub fn generalized_fisher_at(&self, t: f64) -> Result<f64> {
        Ok(self.evaluate(t)?.gen_fisher_p)
    }

    pub fn evaluate_on(&self, t: f64, grid: &QuadratureGrid) -> Result<Sample> {
        let (f, g) = self.states_at(t)?;
        let a: Vec<f64> = f.first_moment().iter().copied().collect();
        let mass = f.mass();
        let pass = Pass {
            f: &f,
            g: &g,
            a: &a,
            mass,
            f_l2: lp_finite(&f, 2.0),
            f_lp: lp_finite(&f, self.p),
            g_l2: lp_finite(&g, 2.0),
        };
        let v = self.node_pass(&pass, grid)?;
        let moment_eps = if self.p > 1.0 { moment_exponent(self.p) } else { moment_exponent(2.0) };
        let exp_moment = match exponential_moment(&f, moment_eps, grid) {
            Ok(m) => m,
            Err(Error::DivergentMoment(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let inf_unless = |ok: bool, v: f64| if ok { v } else { f64::INFINITY };
        Ok(Sample {
            t,
            mass,
            e_p: inf_unless(pass.f_lp, v[0]),
            e_2: inf_unless(pass.f_l2, v[1]),
            fisher_p: v[2],
            fisher_p_identity: v[3],
            gen_fisher_1: v[4],
            gen_fisher_p: v[5],
            fisher2_g: inf_unless(pass.g_l2, v[6]),
            fisher2_g_identity: inf_unless(pass.g_l2, v[7]),
            g_l2_sq: inf_unless(pass.g_l2, v[8]),
            e2_g: inf_unless(pass.g_l2, v[9]),
            fisher2_f2: inf_unless(pass.f_l2, v[10]),
            gen_fisher_p_f2: v[11],
            gen_fisher_p_f1: v[12],
            norm_f1: a.iter().map(|x| x * x).sum::<f64>().sqrt(),
            norm_f2_minus_finf: inf_unless(pass.f_l2, v[13].sqrt()),
            a,
            exp_moment,
            bounds: SampleBounds {
                fisher: 0.0,
                envelope: 0.0,
                l2: 0.0,
                fisher2: 0.0,
            },
        })
    }

    fn node_pass(&self, pass: &Pass<'_>, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        let d = self.dim();
        let psi_p = PEntropy::new(self.p)?;
        let psi_2 = PEntropy::new(2.0)?;
        let p = self.p;
        let pm = &self.pm;
        grid.try_integrate_many_with(N_OUT, self.parallel, |x, out| {
            let mut gf = [0.0f64; 3];
            let mut gg = [0.0f64; 3];
            let rf = pass.f.ratio_and_grad(x, &mut gf[..d]);
            let rg = pass.g.ratio_and_grad(x, &mut gg[..d]);
            if rf < -NEGATIVE_SLACK {
                return Err(Error::Domain(format!("f/f_inf = {rf:.3e} < 0 at {x:?}")));
            }
            let rf0 = rf.max(0.0);
            let mut gf2 = [0.0f64; 3];
            let mut ax = 0.0;
            for i in 0..d {
                gf2[i] = gf[i] - pass.a[i];
                ax += pass.a[i] * x[i];
            }
            let q_f = quad(pm, &gf[..d]);
            let q_g = quad(pm, &gg[..d]);
            let q_f2 = quad(pm, &gf2[..d]);
            let q_f1 = quad(pm, &pass.a[..d]);
            let id_f: f64 = gf[..d].iter().map(|v| v * v).sum();
            let id_g: f64 = gg[..d].iter().map(|v| v * v).sum();
            let wp = psi_second(p, rf0);
            let w1 = psi_second(1.0, rf0);

            out[0] = psi_p.psi(rf0);
            out[1] = psi_2.psi(rf0);
            out[2] = weighted(wp, q_f);
            out[3] = weighted(wp, id_f);
            out[4] = weighted(w1, q_g);
            out[5] = weighted(wp, q_g);
            out[6] = q_g;
            out[7] = id_g;
            out[8] = rg * rg;
            out[9] = psi_2.psi(rg);
            out[10] = q_f2;
            out[11] = weighted(wp, q_f2);
            out[12] = weighted(wp, q_f1);
            out[13] = (rf - ax - pass.mass).powi(2);
            Ok(())
        })
    }

    /// Re-evaluates the sample at `t` on the doubled grid and returns the
    /// largest relative change, or `UnderResolved` above `tol`.
    fn resolution_test(&self, t: f64, tol: f64) -> Result<f64> {
        let coarse = self.samples.iter().find(|s| s.t == t).cloned();
        let coarse = match coarse {
            Some(s) => s,
            None => self.evaluate(t)?,
        };
        let fine = self.evaluate_on(t, &self.grid.doubled()?)?;
        let pick = |s: &Sample| [s.e_p, s.fisher_p, s.gen_fisher_1, s.gen_fisher_p, s.fisher2_g];
        let names = ["e_p", "I_p^P", "genI_1", "genI_p", "I_2^P(g)"];
        let (c, f) = (pick(&coarse), pick(&fine));
        let mut used_names = Vec::new();
        let mut used_c = Vec::new();
        let mut used_f = Vec::new();
        for k in 0..names.len() {
            if c[k].is_finite() && f[k].is_finite() {
                used_names.push(names[k]);
                used_c.push(c[k]);
                used_f.push(f[k]);
            }
        }
        check_resolution(&used_names, &used_c, &used_f, tol)?;
        Ok(used_c
            .iter()
            .zip(&used_f)
            .map(|(a, b)| crate::functionals::relative_change(*a, *b, 1e-12))
            .fold(0.0, f64::max))
    }
}

/// `ψ_p''(r)`, infinite below the ratio floor when `p < 2`.
fn psi_second(p: f64, r: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if r >= RATIO_FLOOR {
        r.powf(p - 2.0)
    } else {
        f64::INFINITY
    }
}

/// `w · q` with `∞ · 0 = 0`.
fn weighted(w: f64, q: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else {
        w * q
    }
}

fn quad(pm: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += v[i] * pm[(i, j)] * v[j];
        }
    }
    s
}

fn empty_sample() -> Sample {
    Sample {
        t: 0.0,
        mass: 0.0,
        e_p: 0.0,
        e_2: 0.0,
        fisher_p: 0.0,
        fisher_p_identity: 0.0,
        gen_fisher_1: 0.0,
        gen_fisher_p: 0.0,
        fisher2_g: 0.0,
        fisher2_g_identity: 0.0,
        g_l2_sq: 0.0,
        e2_g: 0.0,
        fisher2_f2: 0.0,
        gen_fisher_p_f1: 0.0,
        gen_fisher_p_f2: 0.0,
        a: Vec::new(),
        norm_f1: 0.0,
        norm_f2_minus_finf: 0.0,
        exp_moment: 0.0,
        bounds: SampleBounds {
            fisher: 0.0,
            envelope: 0.0,
            l2: 0.0,
            fisher2: 0.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{normalize_system, FPSystem};
    use crate::propagator::GaussianMixture;
    use approx::assert_relative_eq;

    fn identity_system() -> NormalizedSystem {
        let sys = FPSystem::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), 1e-9).unwrap();
        normalize_system(&sys).unwrap()
    }

    #[test]
    fn shifted_gaussian_entropy_closed_form() {
        let ns = identity_system();
        let f0 = DensityState::Mixture(GaussianMixture::shifted(&[0.5, 0.0]));
        let times = vec![0.0, 0.5, 1.0, 2.0];
        let opts = TrajectoryOptions::new(2.0, DMatrix::identity(2, 2), times);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        for s in &traj.samples {
            let m2 = 0.25 * (-2.0 * s.t).exp();
            assert_relative_eq!(s.e_2, (m2.exp() - 1.0) / 2.0, max_relative = 1e-10);
            assert_relative_eq!(s.fisher2_g, m2 * m2.exp(), max_relative = 1e-10);
            assert_relative_eq!(s.gen_fisher_1, m2, max_relative = 1e-10);
            assert_relative_eq!(s.norm_f1, 0.5 * (-s.t).exp(), max_relative = 1e-12);
            assert_relative_eq!(s.mass, 1.0, epsilon = 1e-14);
            // f₂ = f − f₁ and I₂(f) ≤ 2(I₂(f₁) + I₂(f₂))
            assert!(s.fisher_p <= 2.0 * (s.gen_fisher_p_f1 + s.gen_fisher_p_f2) + 1e-14);
        }
        assert!(traj.resolution_change.unwrap() < 1e-8);
        assert_relative_eq!(traj.lambda, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let ns = identity_system();
        let f0 = DensityState::Mixture(GaussianMixture::standard(2));
        let opts = TrajectoryOptions::new(1.5, DMatrix::identity(2, 2), vec![0.0, 1.0, 3.0]);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        for s in &traj.samples {
            for v in [s.e_p, s.e_2, s.fisher_p, s.gen_fisher_1, s.gen_fisher_p, s.norm_f1] {
                assert!(v.abs() < 1e-14, "{v}");
            }
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let ns = identity_system();
        let f0 = DensityState::Mixture(
            GaussianMixture::gaussian(&[1.0, -0.5], DMatrix::from_diagonal_element(2, 2, 0.6)).unwrap(),
        );
        let mut opts = TrajectoryOptions::new(1.5, DMatrix::identity(2, 2), vec![0.1, 0.7]);
        opts.grid_degree = Some(24);
        opts.resolution_tol = None;
        let a = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        opts.parallel = false;
        let b = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn wide_initial_data_has_infinite_l2() {
        let ns = identity_system();
        let f0 = DensityState::Mixture(
            GaussianMixture::gaussian(&[0.0, 0.0], DMatrix::from_diagonal_element(2, 2, 2.5)).unwrap(),
        );
        let mut opts = TrajectoryOptions::new(1.2, DMatrix::identity(2, 2), vec![0.0, 5.0]);
        opts.resolution_tol = None;
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        assert!(traj.samples[0].e_2.is_infinite());
        assert!(traj.samples[1].e_2.is_finite());
    }

    #[test]
    fn time_grid_shape() {
        let t = default_time_grid(15.0, 200).unwrap();
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 15.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(t.len() >= 195);
        assert!(default_time_grid(-1.0, 10).is_err());
    }

    #[test]
    fn certified_rate_matches_lmi() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        // P = I: rate is the smallest eigenvalue of C_s = 1/2
        assert_relative_eq!(certified_rate(&c, &DMatrix::identity(2, 2)).unwrap(), 0.5, epsilon = 1e-12);
        assert!(certified_rate(&c, &DMatrix::zeros(2, 2)).is_err());
    }
}
