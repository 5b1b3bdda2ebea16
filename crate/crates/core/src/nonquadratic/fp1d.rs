//! One-dimensional finite-volume solver for `∂_t f = ∂_x(f_∞ D ∂_x(f/f_∞))`.
//!
//! The unknown is the ratio `r = f/f_∞` on cell centres. Face fluxes use the
//! geometric mean of the neighbouring `f_∞` values, which makes the discrete
//! equilibrium exactly stationary and keeps the ratio system well scaled in
//! the tails. Time stepping is Crank–Nicolson after a few implicit Euler
//! half steps (Rannacher start-up).

use super::ScalarDiffusionProblem;
use crate::error::{Error, Result};
use crate::functionals::PEntropy;
use crate::parallel;
use crate::verifier::CheckRecord;

/// Relative slack of the discrete decay comparison.
pub const DECAY_SLACK: f64 = 1e-3;
/// Face ratios of `f` below this are counted as near vacuum.
pub const NEAR_VACUUM_RATIO: f64 = 1e-8;
/// Absolute slack covering round-off when the initial functional vanishes.
pub const ROUNDOFF_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpSolverOptions {
    pub cells: usize,
    /// Largest Crank–Nicolson step.
    pub dt: f64,
    /// Number of implicit Euler half steps replacing the first CN steps.
    pub rannacher_steps: usize,
}

impl Default for FpSolverOptions {
    fn default() -> Self {
        FpSolverOptions {
            cells: 2048,
            dt: 1e-3,
            rannacher_steps: 4,
        }
    }
}

/// Cell-centred grid on `[−L, L]`.
#[derive(Debug, Clone)]
pub struct Fp1dGrid {
    pub x: Vec<f64>,
    pub h: f64,
    pub phi: Vec<f64>,
    /// Discrete equilibrium, normalized so that `h Σ f_∞ = 1`.
    pub f_inf: Vec<f64>,
    /// `D` at the interior faces.
    pub d_face: Vec<f64>,
    /// Largest `|φ_{i+1} − φ_i| / 2`, the cell Péclet number of the drift.
    pub peclet: f64,
}

impl Fp1dGrid {
    pub fn new(prob: &ScalarDiffusionProblem, cells: usize) -> Result<Self> {
        if prob.dim != 1 {
            return Err(Error::Dimension(format!(
                "the finite-volume solver is one-dimensional, got d = {}",
                prob.dim
            )));
        }
        if cells < 3 {
            return Err(Error::Parameter(format!("need three or more cells, got {cells}")));
        }
        let tail = prob.tail_mass_1d()?;
        if tail > super::TAIL_TOLERANCE {
            return Err(Error::Domain(format!(
                "e^(-phi) has relative tail mass {tail:.3e} outside |x| <= {}",
                prob.half_width
            )));
        }
        let l = prob.half_width;
        let h = 2.0 * l / cells as f64;
        let x: Vec<f64> = (0..cells).map(|i| -l + (i as f64 + 0.5) * h).collect();
        let phi: Vec<f64> = x.iter().map(|v| prob.phi.value(&[*v])).collect();
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("potential is not finite on the grid".into()));
        }
        let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = phi.iter().map(|p| (min - p).exp()).collect();
        let z = h * w.iter().sum::<f64>();
        let f_inf = w.iter().map(|v| v / z).collect();
        let mut d_face = Vec::with_capacity(cells - 1);
        for i in 0..cells - 1 {
            let xf = -l + (i + 1) as f64 * h;
            let d = prob.diffusion.value(&[xf]);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Domain(format!("D({xf}) = {d} is not positive")));
            }
            d_face.push(d);
        }
        let peclet = phi.windows(2).map(|p| 0.5 * (p[1] - p[0]).abs()).fold(0.0, f64::max);
        Ok(Fp1dGrid {
            x,
            h,
            phi,
            f_inf,
            d_face,
            peclet,
        })
    }

    pub fn cells(&self) -> usize {
        self.x.len()
    }

    /// Off-diagonal coefficients of the ratio operator: `(lower_i, upper_i)`
    /// couple cell `i` to `i−1` and `i+1`.
    fn coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.cells();
        let h2 = self.h * self.h;
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n - 1 {
            let delta = self.phi[i + 1] - self.phi[i];
            upper[i] = self.d_face[i] * (-0.5 * delta).exp() / h2;
            lower[i + 1] = self.d_face[i] * (0.5 * delta).exp() / h2;
        }
        (lower, upper)
    }

    /// `h Σ f_∞ r`.
    pub fn mass(&self, ratio: &[f64]) -> f64 {
        self.h * self.f_inf.iter().zip(ratio).map(|(w, r)| w * r).sum::<f64>()
    }

    /// Geometric-mean equilibrium weight at the interior faces.
    fn face_weight(&self, i: usize) -> f64 {
        (self.f_inf[i] * self.f_inf[i + 1]).sqrt()
    }

    /// Ratio of sampled densities; errors when `f` has mass where `f_∞`
    /// underflows.
    pub fn to_ratio(&self, density: &[f64]) -> Result<Vec<f64>> {
        if density.len() != self.cells() {
            return Err(Error::Dimension(format!(
                "{} samples for {} cells",
                density.len(),
                self.cells()
            )));
        }
        density
            .iter()
            .zip(&self.f_inf)
            .zip(&self.x)
            .map(|((f, w), x)| {
                if *f == 0.0 {
                    Ok(0.0)
                } else if *w > 0.0 {
                    Ok(f / w)
                } else {
                    Err(Error::Precondition(format!(
                        "density {f:e} at x = {x} where the equilibrium underflows"
                    )))
                }
            })
            .collect()
    }

    pub fn to_density(&self, ratio: &[f64]) -> Vec<f64> {
        ratio.iter().zip(&self.f_inf).map(|(r, w)| r * w).collect()
    }

    /// Discrete `𝓘_p(f, g)`: a face sum of `ψ_p''(r̄_f)(Δr_g/h)² D √(f_∞f_∞) h`.
    /// Also returns the number of near-vacuum faces.
    pub fn generalized_fisher(&self, rf: &[f64], rg: &[f64], psi: &PEntropy) -> (f64, usize) {
        let mut sum = 0.0;
        let mut vacuum = 0;
        for i in 0..self.cells() - 1 {
            let w = self.face_weight(i);
            if w == 0.0 {
                continue;
            }
            let rbar = 0.5 * (rf[i] + rf[i + 1]);
            if rbar < NEAR_VACUUM_RATIO {
                vacuum += 1;
            }
            let grad = (rg[i + 1] - rg[i]) / self.h;
            let term = if grad == 0.0 { 0.0 } else { psi.psi_second(rbar) * grad * grad };
            sum += term * self.d_face[i] * w * self.h;
        }
        (sum, vacuum)
    }
}

/// Sampled solution on the output times.
#[derive(Debug, Clone)]
pub struct Fp1dSolution {
    pub times: Vec<f64>,
    pub ratios: Vec<Vec<f64>>,
    /// Largest change of the discrete mass over one step.
    pub max_mass_drift: f64,
    pub min_ratio: f64,
}

impl Fp1dSolution {
    pub fn density(&self, grid: &Fp1dGrid, k: usize) -> Vec<f64> {
        grid.to_density(&self.ratios[k])
    }
}

/// Thomas algorithm for `a_i y_{i−1} + b_i y_i + c_i y_{i+1} = d_i`.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = b.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

/// θ-scheme stepper for the ratio equation.
#[derive(Debug, Clone)]
pub struct FpSolver {
    pub grid: Fp1dGrid,
    pub options: FpSolverOptions,
    lower: Vec<f64>,
    upper: Vec<f64>,
    warnings: Vec<String>,
}

impl FpSolver {
    pub fn new(prob: &ScalarDiffusionProblem, options: FpSolverOptions) -> Result<Self> {
        if !(options.dt > 0.0 && options.dt.is_finite()) {
            return Err(Error::Parameter(format!("time step {} must be > 0", options.dt)));
        }
        let grid = Fp1dGrid::new(prob, options.cells)?;
        let (lower, upper) = grid.coefficients();
        let mut warnings = Vec::new();
        if grid.peclet > 1.0 {
            warnings.push(format!(
                "cell Peclet number {:.3} exceeds 1; the drift is under-resolved near the boundary",
                grid.peclet
            ));
        }
        Ok(FpSolver {
            grid,
            options,
            lower,
            upper,
            warnings,
        })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `r ← (I − θτL)^{-1}(I + (1−θ)τL) r`.
    fn step(&self, r: &mut Vec<f64>, tau: f64, theta: f64, scratch: &mut [f64]) {
        let n = r.len();
        let (lo, up) = (&self.lower, &self.upper);
        let explicit = 1.0 - theta;
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut lr = -(lo[i] + up[i]) * r[i];
                if i > 0 {
                    lr += lo[i] * r[i - 1];
                }
                if i + 1 < n {
                    lr += up[i] * r[i + 1];
                }
                r[i] + explicit * tau * lr
            })
            .collect();
        let a: Vec<f64> = lo.iter().map(|v| -theta * tau * v).collect();
        let c: Vec<f64> = up.iter().map(|v| -theta * tau * v).collect();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + theta * tau * (lo[i] + up[i])).collect();
        solve_tridiagonal(&a, &b, &c, &mut rhs, scratch);
        *r = rhs;
    }

    /// Evolves a ratio vector and samples it at the sorted `times ≥ 0`.
    pub fn solve_ratio(&self, r0: &[f64], times: &[f64]) -> Result<Fp1dSolution> {
        let n = self.grid.cells();
        if r0.len() != n {
            return Err(Error::Dimension(format!("{} ratio values for {n} cells", r0.len())));
        }
        if r0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("initial ratio is not finite".into()));
        }
        if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("output times must be finite, >= 0 and sorted".into()));
        }
        let mut r = r0.to_vec();
        let mut scratch = vec![0.0; n];
        let mut t = 0.0;
        let mut started = false;
        let mut max_drift: f64 = 0.0;
        let mut min_ratio = r.iter().copied().fold(f64::INFINITY, f64::min);
        let mut ratios = Vec::with_capacity(times.len());
        let dt = self.options.dt;
        for &target in times {
            while t < target {
                let remaining = target - t;
                let before = self.grid.mass(&r);
                if !started && self.options.rannacher_steps > 0 {
                    let total = remaining.min(0.5 * dt * self.options.rannacher_steps as f64);
                    let tau = total / self.options.rannacher_steps as f64;
                    for _ in 0..self.options.rannacher_steps {
                        self.step(&mut r, tau, 1.0, &mut scratch);
                    }
                    t += total;
                } else {
                    let steps = (remaining / dt).ceil().max(1.0);
                    let tau = remaining / steps;
                    self.step(&mut r, tau, 0.5, &mut scratch);
                    t = if steps == 1.0 { target } else { t + tau };
                }
                started = true;
                max_drift = max_drift.max((self.grid.mass(&r) - before).abs());
                min_ratio = r.iter().copied().fold(min_ratio, f64::min);
            }
            ratios.push(r.clone());
        }
        Ok(Fp1dSolution {
            times: times.to_vec(),
            ratios,
            max_mass_drift: max_drift,
            min_ratio,
        })
    }

    /// Evolves a sampled non-negative unit-mass density.
    pub fn solve_density(&self, f0: &[f64], times: &[f64]) -> Result<Fp1dSolution> {
        if f0.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Precondition("initial density must be non-negative".into()));
        }
        let r0 = self.grid.to_ratio(f0)?;
        let mass = self.grid.mass(&r0);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "initial density has discrete mass {mass}, expected 1"
            )));
        }
        self.solve_ratio(&r0, times)
    }
}

/// Per-time discrete generalized Fisher information against its bound.
#[derive(Debug, Clone)]
pub struct DecayReport1d {
    pub lambda1: f64,
    pub p: f64,
    pub times: Vec<f64>,
    pub fisher: Vec<f64>,
    pub bound: Vec<f64>,
    pub records: Vec<CheckRecord>,
    /// Largest count of near-vacuum faces over the sampled times.
    pub near_vacuum_faces: usize,
    pub max_mass_drift: f64,
    pub min_ratio_f: f64,
    pub warnings: Vec<String>,
}

impl DecayReport1d {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }
}

/// Evolves the ratios `f₀/f_∞` (renormalized to unit mass) and `g₀/f_∞`
/// and checks `𝓘_p(f(t), g(t)) ≤ 𝓘_p(f₀, g₀) e^{−2λ₁t}` at each time.
pub fn verify_generalized_fisher_decay_1d(
    solver: &FpSolver,
    f0_ratio: &[f64],
    g0_ratio: &[f64],
    p: f64,
    times: &[f64],
    lambda1: f64,
) -> Result<DecayReport1d> {
    if !(lambda1 > 0.0) {
        return Err(Error::Precondition(format!(
            "rate condition not certified: lambda1 = {lambda1}"
        )));
    }
    let psi = PEntropy::new(p)?;
    if f0_ratio.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Precondition("f0 must be non-negative".into()));
    }
    let mass = solver.grid.mass(f0_ratio);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Precondition(format!("f0 has discrete mass {mass}")));
    }
    let rf0: Vec<f64> = f0_ratio.iter().map(|r| r / mass).collect();
    let mut all_times = vec![0.0];
    all_times.extend(times.iter().copied().filter(|t| *t > 0.0));
    let (sf, sg) = (solver.solve_ratio(&rf0, &all_times)?, solver.solve_ratio(g0_ratio, &all_times)?);
    let values = parallel::map_indices(all_times.len(), |k| {
        solver.grid.generalized_fisher(&sf.ratios[k], &sg.ratios[k], &psi)
    });
    let fisher0 = values[0].0;
    if !fisher0.is_finite() {
        return Err(Error::Precondition("initial generalized Fisher information is not finite".into()));
    }
    let mut warnings = solver.warnings().to_vec();
    let near_vacuum_faces = values.iter().map(|v| v.1).max().unwrap_or(0);
    if near_vacuum_faces > 0 && p < 2.0 {
        warnings.push(format!(
            "{near_vacuum_faces} faces with f/f_inf below {NEAR_VACUUM_RATIO:e}"
        ));
    }
    let fisher: Vec<f64> = values.iter().map(|v| v.0).collect();
    let bound: Vec<f64> = all_times.iter().map(|t| fisher0 * (-2.0 * lambda1 * t).exp()).collect();
    let records = all_times
        .iter()
        .zip(fisher.iter().zip(&bound))
        .map(|(t, (i, b))| CheckRecord::new("generalized_fisher_decay_1d", *t, *i, *b, DECAY_SLACK * b + ROUNDOFF_FLOOR))
        .collect();
    Ok(DecayReport1d {
        lambda1,
        p,
        times: all_times,
        fisher,
        bound,
        records,
        near_vacuum_faces,
        max_mass_drift: sf.max_mass_drift.max(sg.max_mass_drift),
        min_ratio_f: sf.min_ratio,
        warnings,
    })
}
