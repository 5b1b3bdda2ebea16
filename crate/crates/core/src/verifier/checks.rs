//! Inequality checks over a sampled trajectory. Every check returns one
//! [`CheckRecord`] per time with both sides and the slack.

use nalgebra::DMatrix;

use super::fit::{fit_decay, log_slope, FitResult};
use super::trajectory::{lp_finite, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::functionals::{
    entropy_p, entropy_p_abs, exponential_moment, generalized_fisher, PEntropy, QuadratureGrid,
    C_LS,
};
use crate::parallel;
use crate::spectral::project_v1;

/// Finite-difference step for the differential Fisher inequality.
pub const FD_STEP: f64 = 1e-3;
/// Relative tolerance of the differential Fisher inequality.
pub const FD_TOL: f64 = 1e-6;
/// Relative slack of the interpolation inequalities.
pub const INTERPOLATION_SLACK: f64 = 1e-8;
/// Relative slack of pairwise exponential-decay comparisons.
pub const PAIRWISE_SLACK: f64 = 1e-9;
/// Relative slack of the improved-decay comparison.
pub const IMPROVED_SLACK: f64 = 1e-8;
/// Allowed deviation of the fitted polynomial order from `2n`.
pub const ORDER_TOLERANCE: f64 = 0.4;
/// Allowed relative deviation of the fitted rate from `2μ` when `n = 0`.
pub const RATE_TOLERANCE: f64 = 0.02;

/// One side-by-side comparison `lhs ≤ rhs + slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub check: String,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

impl CheckRecord {
    pub fn new(check: impl Into<String>, t: f64, lhs: f64, rhs: f64, slack: f64) -> Self {
        CheckRecord {
            check: check.into(),
            t,
            lhs,
            rhs,
            slack,
            passed: lhs <= rhs + slack,
        }
    }

    /// `rhs + slack − lhs`; negative on failure.
    pub fn margin(&self) -> f64 {
        self.rhs + self.slack - self.lhs
    }
}

/// Collected records, fits and warnings of a verification run.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryReport {
    pub checks: Vec<CheckRecord>,
    pub fits: Vec<(String, FitResult)>,
    pub warnings: Vec<String>,
}

impl TrajectoryReport {
    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        self.checks.extend(records);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `(name, records, failures, worst margin)` per check name, in first-seen order.
    pub fn summary(&self) -> Vec<(String, usize, usize, f64)> {
        let mut out: Vec<(String, usize, usize, f64)> = Vec::new();
        for c in &self.checks {
            let idx = match out.iter().position(|o| o.0 == c.check) {
                Some(i) => i,
                None => {
                    out.push((c.check.clone(), 0, 0, f64::INFINITY));
                    out.len() - 1
                }
            };
            let e = &mut out[idx];
            e.1 += 1;
            if !c.passed {
                e.2 += 1;
            }
            e.3 = e.3.min(c.margin());
        }
        out
    }
}

fn sorted_samples(traj: &Trajectory) -> Vec<&Sample> {
    let mut s: Vec<&Sample> = traj.samples.iter().collect();
    s.sort_by(|a, b| a.t.total_cmp(&b.t));
    s
}

/// `e_p(f(t))` non-increasing between consecutive samples.
pub fn check_entropy_monotone(traj: &Trajectory) -> Vec<CheckRecord> {
    sorted_samples(traj)
        .windows(2)
        .map(|w| {
            CheckRecord::new(
                "entropy_monotone",
                w[1].t,
                w[1].e_p,
                w[0].e_p,
                PAIRWISE_SLACK * w[0].e_p.abs() + 1e-16,
            )
        })
        .collect()
}

/// `e_p(f) ≤ ½ I_p^I(f)` at every sample.
pub fn check_log_sobolev(traj: &Trajectory) -> Vec<CheckRecord> {
    sorted_samples(traj)
        .iter()
        .map(|s| {
            let rhs = C_LS * s.fisher_p_identity;
            CheckRecord::new("log_sobolev", s.t, s.e_p, rhs, 1e-9 * rhs.abs() + 1e-15)
        })
        .collect()
}

/// `I_p^P(f) ≤ 2(𝓘_p^P(f, f₁) + 𝓘_p^P(f, f₂))` at every sample.
pub fn check_splitting(traj: &Trajectory) -> Vec<CheckRecord> {
    sorted_samples(traj)
        .iter()
        .map(|s| {
            let rhs = 2.0 * (s.gen_fisher_p_f1 + s.gen_fisher_p_f2);
            CheckRecord::new("fisher_splitting", s.t, s.fisher_p, rhs, 1e-10 * rhs.abs() + 1e-15)
        })
        .collect()
}

/// Differential and integrated Fisher decay at rate `lambda`.
///
/// The derivative is the Richardson extrapolation of centered differences
/// with steps `h` and `h/2`; samples with `t < h` only enter the integrated
/// form.
pub fn check_fisher_differential(traj: &Trajectory, lambda: f64, h: f64) -> Result<Vec<CheckRecord>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("step h = {h} must be > 0")));
    }
    let samples = sorted_samples(traj);
    let floor = 1e-14 * traj.initial.gen_fisher_p.abs();
    let differential = parallel::map_slice(&samples, |s| -> Result<Option<CheckRecord>> {
        if s.t < h {
            return Ok(None);
        }
        let i = |t: f64| traj.generalized_fisher_at(t);
        let d_h = (i(s.t + h)? - i(s.t - h)?) / (2.0 * h);
        let d_h2 = (i(s.t + h / 2.0)? - i(s.t - h / 2.0)?) / h;
        let deriv = (4.0 * d_h2 - d_h) / 3.0;
        let value = s.gen_fisher_p;
        let scale = value.abs().max(deriv.abs());
        Ok(Some(CheckRecord::new(
            "fisher_differential",
            s.t,
            deriv,
            -2.0 * lambda * value,
            FD_TOL * scale + floor,
        )))
    });
    let mut out = Vec::new();
    for r in differential {
        if let Some(rec) = r? {
            out.push(rec);
        }
    }
    for (k, s) in samples.iter().enumerate().skip(1) {
        let rhs = samples[..k]
            .iter()
            .map(|p| p.gen_fisher_p * (-2.0 * lambda * (s.t - p.t)).exp())
            .fold(f64::INFINITY, f64::min);
        out.push(CheckRecord::new(
            "fisher_integrated",
            s.t,
            s.gen_fisher_p,
            rhs,
            PAIRWISE_SLACK * rhs.abs() + floor,
        ));
    }
    Ok(out)
}

/// Pairwise improved decay of `I₂^P(g)` and its log-slope over `window`.
#[derive(Debug, Clone)]
pub struct ImprovedDecayReport {
    pub rate: f64,
    pub records: Vec<CheckRecord>,
    pub slope: f64,
    pub slope_residual: f64,
    pub window: (f64, f64),
}

/// `I₂^P(g(t)) ≤ I₂^P(g(t₀)) e^{−2(λ+d_min)(t−t₀)}` for sampled `0 < t₀ < t`.
/// Requires `g₀ ⊥ V₁`.
pub fn check_improved_decay(
    traj: &Trajectory,
    lambda: f64,
    d_min: f64,
    window: (f64, f64),
) -> Result<ImprovedDecayReport> {
    let a = project_v1(&traj.g0);
    if a.norm() > 1e-10 {
        return Err(Error::Precondition(format!(
            "g0 is not orthogonal to V1: |a| = {:.3e}",
            a.norm()
        )));
    }
    if !(d_min > 0.0) {
        return Err(Error::Precondition(format!("D must be positive definite, d_min = {d_min}")));
    }
    let rate = 2.0 * (lambda + d_min);
    let samples: Vec<&Sample> = sorted_samples(traj).into_iter().filter(|s| s.t > 0.0).collect();
    let mut records = Vec::new();
    for (k, s) in samples.iter().enumerate().skip(1) {
        let rhs = samples[..k]
            .iter()
            .map(|p| p.fisher2_g * (-rate * (s.t - p.t)).exp())
            .fold(f64::INFINITY, f64::min)
            * (1.0 + IMPROVED_SLACK);
        records.push(CheckRecord::new("improved_decay", s.t, s.fisher2_g, rhs, 1e-300));
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let v: Vec<f64> = samples.iter().map(|s| s.fisher2_g).collect();
    let (slope, slope_residual) = if v.iter().all(|x| *x == 0.0) {
        (f64::NEG_INFINITY, 0.0)
    } else {
        log_slope(&t, &v, window)?
    };
    Ok(ImprovedDecayReport {
        rate,
        records,
        slope,
        slope_residual,
        window,
    })
}

/// Both interpolation inequalities for one `(f, g, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationCheck {
    pub p: f64,
    pub constant: f64,
    /// `𝓘_p^P(f, g)`.
    pub lhs: f64,
    pub i1: f64,
    pub i2: f64,
    /// `constant · 𝓘₁^{2−p} I₂^{p−1}`.
    pub rhs: f64,
    /// `2 c₁ 𝓘₁^α I₂^{1−α} + 2 c₂ I₂` with `α = 2−p, c₁ = 1, c₂ = 0`.
    pub general_rhs: f64,
    pub passed: bool,
}

/// Evaluates both bounds from the three functionals.
pub fn interpolation_from_values(p: f64, lhs: f64, i1: f64, i2: f64) -> Result<InterpolationCheck> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Parameter(format!("interpolation needs 1 < p < 2, got {p}")));
    }
    if !(lhs.is_finite() && i1.is_finite() && i2.is_finite()) {
        return Err(Error::Precondition(format!(
            "interpolation needs finite functionals: I_p = {lhs}, I_1 = {i1}, I_2 = {i2}"
        )));
    }
    let constant = PEntropy::new(p)?.interpolation_constant();
    let alpha = 2.0 - p;
    let core = i1.powf(alpha) * i2.powf(1.0 - alpha);
    let rhs = constant * core;
    let general_rhs = 2.0 * core;
    let tol = |r: f64| r * (1.0 + INTERPOLATION_SLACK) + 1e-300;
    Ok(InterpolationCheck {
        p,
        constant,
        lhs,
        i1,
        i2,
        rhs,
        general_rhs,
        passed: lhs <= tol(rhs) && lhs <= tol(general_rhs),
    })
}

/// Evaluates `𝓘_p, 𝓘_1, I_2` for `(f, g)` and checks both bounds.
pub fn check_interpolation(
    f: &crate::propagator::DensityState,
    g: &crate::propagator::DensityState,
    p: f64,
    pm: &DMatrix<f64>,
    grid: &QuadratureGrid,
) -> Result<InterpolationCheck> {
    let lhs = generalized_fisher(f, g, p, pm, grid)?;
    let i1 = generalized_fisher(f, g, 1.0, pm, grid)?;
    let i2 = generalized_fisher(f, g, 2.0, pm, grid)?;
    interpolation_from_values(p, lhs, i1, i2)
}

/// Interpolation at every sample for the trajectory's `p` (skipped unless `1 < p < 2`).
pub fn check_interpolation_traj(traj: &Trajectory) -> Result<Vec<CheckRecord>> {
    if !(traj.p > 1.0 && traj.p < 2.0) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for s in sorted_samples(traj) {
        if !(s.gen_fisher_p.is_finite() && s.gen_fisher_1.is_finite() && s.fisher2_g.is_finite()) {
            continue;
        }
        let c = interpolation_from_values(traj.p, s.gen_fisher_p, s.gen_fisher_1, s.fisher2_g)?;
        out.push(CheckRecord::new(
            "interpolation",
            s.t,
            c.lhs,
            c.rhs,
            INTERPOLATION_SLACK * c.rhs + 1e-300,
        ));
    }
    Ok(out)
}

/// Pointwise lower bound on a box at several times.
#[derive(Debug, Clone)]
pub struct LowerBoundReport {
    pub eta: f64,
    pub eps: f64,
    pub moment: f64,
    pub constant: f64,
    /// `t̂₁(η)`.
    pub time: f64,
    /// `lhs` is the bound and `rhs` the density at the worst box point.
    pub records: Vec<CheckRecord>,
    pub worst_points: Vec<Vec<f64>>,
    /// Earliest scanned time from which every later scanned time passes.
    pub earliest_pass: Option<f64>,
}

/// Uniform box `[-half, half]^d` with `points` per axis.
pub fn box_grid(dim: usize, points: usize, half: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..points)
        .map(|k| -half + 2.0 * half * k as f64 / (points - 1).max(1) as f64)
        .collect();
    let total = points.pow(dim as u32);
    (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; dim];
            for v in x.iter_mut().rev() {
                *v = axis[flat % points];
                flat /= points;
            }
            x
        })
        .collect()
}

fn lower_bound_at(
    traj: &Trajectory,
    t: f64,
    constant: f64,
    eta: f64,
    points: &[Vec<f64>],
) -> Result<(f64, f64, Vec<f64>)> {
    let (f, _) = traj.states_at(t)?;
    let ratios = parallel::map_slice(points, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let bound = constant * (-(0.5 + eta) * r2).exp();
        (f.density(x) / bound, bound)
    });
    let (k, _) = ratios
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .ok_or_else(|| Error::InvalidInput("empty box grid".into()))?;
    let (ratio, bound) = ratios[k];
    Ok((bound, ratio * bound, points[k].clone()))
}

/// `f(t, x) ≥ C_{η,f₀} e^{−(½+η)|x|²}` on the box for each `t ≥ t̂₁(η)`.
pub fn check_lower_bound(
    traj: &Trajectory,
    eta: f64,
    eps: f64,
    times: &[f64],
    points_per_axis: usize,
    half_width: f64,
) -> Result<LowerBoundReport> {
    if !traj.f0.is_nonnegative_mixture() {
        return Err(Error::Precondition("lower bound needs a non-negative f0 mixture".into()));
    }
    let moment = exponential_moment(&traj.f0, eps, &traj.grid)?;
    let constant = traj.bounds.lower_bound_constant(eta, eps, moment)?;
    let time = traj.bounds.t_hat_1(eta)?;
    if let Some(t) = times.iter().find(|t| **t < time) {
        return Err(Error::Precondition(format!(
            "sample time {t} precedes the lower-bound time {time}"
        )));
    }
    let points = box_grid(traj.dim(), points_per_axis, half_width);
    let mut records = Vec::new();
    let mut worst_points = Vec::new();
    for &t in times {
        let (bound, density, x) = lower_bound_at(traj, t, constant, eta, &points)?;
        records.push(CheckRecord::new("lower_bound", t, bound, density, 1e-12 * bound));
        worst_points.push(x);
    }
    let scan = scan_times(time);
    let mut passes = Vec::new();
    for &t in &scan {
        let (bound, density, _) = lower_bound_at(traj, t, constant, eta, &points)?;
        passes.push(bound <= density + 1e-12 * bound);
    }
    Ok(LowerBoundReport {
        eta,
        eps,
        moment,
        constant,
        time,
        records,
        worst_points,
        earliest_pass: earliest_pass(&scan, &passes),
    })
}

/// Eight geometric times from `t*/16` to `t*`, or `[0]` when `t* = 0`.
fn scan_times(t_star: f64) -> Vec<f64> {
    if t_star <= 0.0 {
        return vec![0.0];
    }
    (0..8)
        .map(|k| t_star * 16f64.powf(k as f64 / 7.0 - 1.0))
        .collect()
}

fn earliest_pass(times: &[f64], passes: &[bool]) -> Option<f64> {
    let mut earliest = None;
    for (t, ok) in times.iter().zip(passes).rev() {
        if *ok {
            earliest = Some(*t);
        } else {
            break;
        }
    }
    earliest
}

/// Explicit times of the contractivity estimates for one constant scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractivityTimes {
    /// Factor applied to `c̃, ĉ`.
    pub scale: f64,
    /// `t₁(p₂)`.
    pub t1: f64,
    /// `t₁(p₁, p₂, η)`.
    pub t1_hypo: f64,
    pub tau3: f64,
}

#[derive(Debug, Clone)]
pub struct ContractivityReport {
    pub p1: f64,
    pub p2: f64,
    pub eta: f64,
    pub e_p1_f0: f64,
    pub e_p2_g0: f64,
    pub a_const: f64,
    pub b_const: f64,
    pub times: ContractivityTimes,
    /// Times at `c̃, ĉ` scaled by ½ and 2.
    pub sensitivity: Vec<ContractivityTimes>,
    pub records: Vec<CheckRecord>,
    /// Earliest scanned time from which every inequality holds.
    pub earliest_pass: Option<f64>,
    /// Set when halving `c̃, ĉ` would move an explicit time before the
    /// earliest passing time, i.e. the verdict leans on the estimates.
    pub constant_sensitive: bool,
}

fn contractivity_times(traj: &Trajectory, scale: f64, p1: f64, p2: f64, eta: f64) -> Result<ContractivityTimes> {
    let b = traj.bounds.with_scaled_constants(scale);
    Ok(ContractivityTimes {
        scale,
        t1: b.t1(p2)?,
        t1_hypo: b.t1_hypo(p1, p2, eta)?,
        tau3: b.tau3()?,
    })
}

/// Evaluates the four contractivity inequalities and the improved `I₂`
/// bound at `t`; `gates` restricts each to times after its explicit time.
#[allow(clippy::too_many_arguments)]
fn contractivity_records(
    traj: &Trajectory,
    t: f64,
    p1: f64,
    p2: f64,
    eta: f64,
    p_list: &[f64],
    factors: (f64, f64),
    gates: Option<&ContractivityTimes>,
) -> Result<Vec<CheckRecord>> {
    let (f, g) = traj.states_at(t)?;
    let s = traj.evaluate(t)?;
    let (f1_factor, g_factor) = factors;
    let a = traj.bounds.a_const(p2)?;
    let b = traj.bounds.b_const(p2)?;
    let open = |gate: fn(&ContractivityTimes) -> f64| gates.is_none_or(|g| t >= gate(g));
    let rel = |r: f64| 1e-12 * r.abs();
    let mut out = Vec::new();
    if open(|g| g.t1) {
        let g_pow = g_factor.powf(2.0 / p2);
        out.push(CheckRecord::new("contractivity_l2", t, s.g_l2_sq, a * g_pow, rel(a * g_pow)));
        let e_rhs = a.max(1.0) * g_pow;
        out.push(CheckRecord::new("contractivity_e2", t, s.e2_g, e_rhs, rel(e_rhs)));
        out.push(CheckRecord::new("contractivity_fisher2", t, s.fisher2_g, b * g_pow, rel(b * g_pow)));
    }
    if open(|g| g.t1_hypo) {
        for &p in p_list {
            let c = traj.bounds.c_const(p, p1, p2, eta)?;
            let rhs = c * f1_factor.powf(eta * (2.0 - p) / p1) * g_factor.powf(2.0 / p2);
            let lhs = match generalized_fisher(&f, &g, p, &traj.pm, &traj.grid) {
                Ok(v) => v,
                Err(Error::SingularIntegrand { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            out.push(CheckRecord::new(format!("contractivity_fisher_p{p}"), t, lhs, rhs, rel(rhs)));
        }
    }
    if open(|g| g.tau3) {
        let rhs = traj.bounds.improved_hyper_const() * traj.initial.e2_g;
        out.push(CheckRecord::new(
            "hypercontractivity_improved",
            t,
            s.fisher2_g_identity,
            rhs,
            rel(rhs) + 1e-15,
        ));
    }
    Ok(out)
}

/// Contractivity estimates at the given times, each inequality gated by its
/// explicit time. `p_list` holds the exponents `p ∈ [1, 2)` of the
/// generalized Fisher bound.
pub fn check_contractivity(
    traj: &Trajectory,
    p1: f64,
    p2: f64,
    eta: f64,
    p_list: &[f64],
    times: &[f64],
) -> Result<ContractivityReport> {
    if !traj.f0.is_nonnegative_mixture() {
        return Err(Error::Precondition("contractivity needs a non-negative f0 mixture".into()));
    }
    if !lp_finite(&traj.f0, p1) || !lp_finite(&traj.g0, p2) {
        return Err(Error::Precondition(format!(
            "e_{p1}(f0) or e_{p2}(|g0|) is infinite"
        )));
    }
    let e_p1_f0 = entropy_p(&traj.f0, p1, &traj.grid)?;
    let e_p2_g0 = entropy_p_abs(&traj.g0, p2, &traj.grid)?;
    let factors = (
        super::bounds::entropy_factor(p1, e_p1_f0),
        super::bounds::entropy_factor(p2, e_p2_g0),
    );
    let gate = contractivity_times(traj, 1.0, p1, p2, eta)?;
    if let Some(t) = times.iter().find(|t| **t < gate.t1) {
        return Err(Error::Precondition(format!(
            "sample time {t} precedes t1({p2}) = {}",
            gate.t1
        )));
    }
    let sensitivity = [0.5, 2.0]
        .iter()
        .map(|&s| contractivity_times(traj, s, p1, p2, eta))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    for &t in times {
        records.extend(contractivity_records(traj, t, p1, p2, eta, p_list, factors, Some(&gate))?);
    }
    let latest = gate.t1.max(gate.t1_hypo).max(gate.tau3);
    let scan = scan_times(latest);
    let mut passes = Vec::new();
    for &t in &scan {
        let recs = contractivity_records(traj, t, p1, p2, eta, p_list, factors, None)?;
        passes.push(recs.iter().all(|r| r.passed));
    }
    let earliest = earliest_pass(&scan, &passes);
    let half = &sensitivity[0];
    let half_latest = half.t1.max(half.t1_hypo).max(half.tau3);
    Ok(ContractivityReport {
        p1,
        p2,
        eta,
        e_p1_f0,
        e_p2_g0,
        a_const: traj.bounds.a_const(p2)?,
        b_const: traj.bounds.b_const(p2)?,
        times: gate,
        sensitivity,
        records,
        earliest_pass: earliest,
        constant_sensitive: earliest.is_none_or(|e| half_latest < e),
    })
}

/// Envelope boundedness and sharpness of the decay.
#[derive(Debug, Clone)]
pub struct MainTheoremReport {
    /// `None` when the entropy vanishes identically.
    pub fit: Option<FitResult>,
    /// Which entropy was fitted: `e_2` when finite on the window, else `e_p`.
    pub fitted: &'static str,
    /// `sup_t e_p(t) / ((1+t^{2n})e^{−2μt})` over the samples.
    pub envelope_sup_entropy: f64,
    /// `sup_t I_p^P(f(t)) / ((1+t^{2n})e^{−2μt})` over the samples.
    pub envelope_sup_fisher: f64,
    /// Log-log slope of the entropy envelope ratio on the window.
    pub envelope_tail_slope: f64,
    pub tau0: f64,
    pub records: Vec<CheckRecord>,
    pub warnings: Vec<String>,
}

/// Envelope ratio sup, polynomial-order fit and, for `n = 0`, rate fit on
/// `[8/μ, 15/μ]`.
pub fn check_main_theorems(traj: &Trajectory) -> Result<MainTheoremReport> {
    let mu = traj.spectral.mu;
    let n = traj.spectral.n;
    let window = (8.0 / mu, 15.0 / mu);
    let samples = sorted_samples(traj);
    let t_hi = samples.last().map_or(0.0, |s| s.t);
    if t_hi < window.1 * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "trajectory ends at {t_hi}, before the fit window end {}",
            window.1
        )));
    }
    let mut warnings = Vec::new();
    let tau0 = traj.bounds.tau0(traj.p2)?;
    if t_hi < tau0.max(window.0) {
        warnings.push(format!(
            "trajectory end {t_hi:.6} precedes the estimated tau0 = {tau0:.6}; the fit window is kept at [{:.6}, {:.6}]",
            window.0, window.1
        ));
    }
    let env = |s: &Sample| traj.spectral.squared_envelope(s.t);
    let envelope_sup_entropy = samples.iter().map(|s| s.e_p / env(s)).fold(0.0, f64::max);
    let envelope_sup_fisher = samples
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| s.fisher_p / env(s))
        .fold(0.0, f64::max);

    let in_window: Vec<&&Sample> = samples
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1)
        .collect();
    let use_e2 = in_window.iter().all(|s| s.e_2.is_finite());
    let fitted = if use_e2 { "e_2" } else { "e_p" };
    let pick = |s: &Sample| if use_e2 { s.e_2 } else { s.e_p };
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let values: Vec<f64> = samples.iter().map(|s| pick(s)).collect();

    let mut records = Vec::new();
    let vanishing = in_window.iter().all(|s| pick(s) <= 0.0);
    let (fit, envelope_tail_slope) = if vanishing {
        (None, 0.0)
    } else {
        let fit = fit_decay(&times, &values, mu, n, window)?;
        if !fit.is_conclusive() {
            warnings.push(format!(
                "inconclusive fit: residual {:.3e} exceeds {}",
                fit.residual,
                super::fit::INCONCLUSIVE_RESIDUAL
            ));
        }
        let ratio: Vec<f64> = samples.iter().map(|s| pick(s) / env(s)).collect();
        let log_t: Vec<f64> = times.iter().map(|t| t.max(f64::MIN_POSITIVE)).collect();
        let (slope, _) = log_slope(
            &log_t.iter().map(|t| t.ln()).collect::<Vec<_>>(),
            &ratio,
            (window.0.ln(), window.1.ln()),
        )?;
        records.push(CheckRecord::new(
            "sharpness_order",
            window.1,
            (fit.poly_order_fit - 2.0 * n as f64).abs(),
            ORDER_TOLERANCE,
            0.0,
        ));
        if n == 0 {
            records.push(CheckRecord::new(
                "sharpness_rate",
                window.1,
                (fit.rate_fit / (2.0 * mu) - 1.0).abs(),
                RATE_TOLERANCE,
                0.0,
            ));
        }
        (Some(fit), slope)
    };
    records.push(CheckRecord::new(
        "envelope_bounded",
        window.1,
        if envelope_sup_entropy.is_finite() { envelope_tail_slope } else { f64::INFINITY },
        ORDER_TOLERANCE,
        0.0,
    ));
    Ok(MainTheoremReport {
        fit,
        fitted,
        envelope_sup_entropy,
        envelope_sup_fisher,
        envelope_tail_slope,
        tau0,
        records,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{build_certificate, normalize_system, FPSystem};
    use crate::propagator::{DensityState, GaussianMixture, HermiteExpansion};
    use crate::verifier::trajectory::{default_time_grid, run_trajectory, TrajectoryOptions};
    use approx::assert_relative_eq;

    fn system(c: &[f64]) -> crate::matrix::NormalizedSystem {
        let sys = FPSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, c),
            1e-9,
        )
        .unwrap();
        normalize_system(&sys).unwrap()
    }

    fn shifted(m: &[f64]) -> DensityState {
        DensityState::Mixture(GaussianMixture::shifted(m))
    }

    #[test]
    fn interpolation_equilibrium_example() {
        // f = f_∞, g = x₁ f_∞: all three functionals equal 1.
        let grid = QuadratureGrid::new(2, 20).unwrap();
        let f = DensityState::Mixture(GaussianMixture::standard(2));
        let g = DensityState::Hermite(HermiteExpansion::new(2, 1, &[(vec![1, 0], 1.0)]).unwrap());
        let c = check_interpolation(&f, &g, 1.5, &DMatrix::identity(2, 2), &grid).unwrap();
        assert_relative_eq!(c.lhs, 1.0, epsilon = 1e-13);
        assert_relative_eq!(c.rhs, 2.0, epsilon = 1e-13);
        assert!(c.passed);
        let zero = interpolation_from_values(1.5, 0.0, 0.0, 0.0).unwrap();
        assert!(zero.passed);
    }

    #[test]
    fn fisher_equality_case() {
        let ns = system(&[1.0, 0.0, 0.0, 1.0]);
        let f0 = shifted(&[0.6, -0.3]);
        let times: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64).collect();
        let mut opts = TrajectoryOptions::new(1.0, DMatrix::identity(2, 2), times);
        opts.grid_degree = Some(40);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        for s in &traj.samples {
            assert_relative_eq!(s.gen_fisher_p, 0.45 * (-2.0 * s.t).exp(), max_relative = 1e-10);
        }
        let recs = check_fisher_differential(&traj, 1.0, FD_STEP).unwrap();
        assert!(recs.iter().all(|r| r.passed), "{:?}", recs.iter().find(|r| !r.passed));
        // a faster claimed rate must fail
        let bad = check_fisher_differential(&traj, 1.01, FD_STEP).unwrap();
        assert!(bad.iter().any(|r| !r.passed));
    }

    #[test]
    fn defective_system_with_certificate() {
        let ns = system(&[1.0, 1.0, 0.0, 1.0]);
        let cert = build_certificate(&ns.c_tilde, 0.25, 1e-9).unwrap();
        let f0 = shifted(&[0.5, 0.0]);
        let g0 = DensityState::Mixture(
            GaussianMixture::gaussian(&[-0.4, 0.7], DMatrix::from_diagonal_element(2, 2, 0.8)).unwrap(),
        );
        let times: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
        let mut opts = TrajectoryOptions::new(1.5, cert.p.clone(), times);
        opts.grid_degree = Some(40);
        let traj = run_trajectory(&ns, &f0, &g0, &opts).unwrap();
        let recs = check_fisher_differential(&traj, cert.lambda, FD_STEP).unwrap();
        assert!(recs.iter().all(|r| r.passed));
        assert!(check_interpolation_traj(&traj).unwrap().iter().all(|r| r.passed));
        assert!(check_log_sobolev(&traj).iter().all(|r| r.passed));
        assert!(check_entropy_monotone(&traj).iter().all(|r| r.passed));
        assert!(check_splitting(&traj).iter().all(|r| r.passed));
    }

    #[test]
    fn improved_decay_rate_four() {
        let ns = system(&[1.0, 0.0, 0.0, 1.0]);
        let f0 = DensityState::Mixture(GaussianMixture::standard(2));
        let g0 = DensityState::Hermite(
            HermiteExpansion::from_unnormalized(2, 2, &[(vec![2, 0], 1.0)]).unwrap(),
        );
        let times: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
        let mut opts = TrajectoryOptions::new(2.0, DMatrix::identity(2, 2), times);
        opts.grid_degree = Some(20);
        let traj = run_trajectory(&ns, &f0, &g0, &opts).unwrap();
        let rep = check_improved_decay(&traj, 1.0, 1.0, (0.5, 3.0)).unwrap();
        assert_relative_eq!(rep.slope, -4.0, epsilon = 1e-8);
        assert!(rep.records.iter().all(|r| r.passed));
        // g0 with a V₁ component is rejected
        let traj2 = run_trajectory(&ns, &f0, &shifted(&[0.3, 0.0]), &opts).unwrap();
        assert!(matches!(
            check_improved_decay(&traj2, 1.0, 1.0, (0.5, 3.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn main_theorem_identity_rate() {
        let ns = system(&[1.0, 0.0, 0.0, 1.0]);
        let f0 = shifted(&[0.5, 0.0]);
        let mut opts = TrajectoryOptions::new(2.0, DMatrix::identity(2, 2), default_time_grid(15.0, 60).unwrap());
        opts.grid_degree = Some(30);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        let rep = check_main_theorems(&traj).unwrap();
        let fit = rep.fit.unwrap();
        assert!((fit.rate_fit - 2.0).abs() < 0.04 * 1.0, "{fit:?}");
        assert!(rep.records.iter().all(|r| r.passed), "{:?}", rep.records);
    }

    #[test]
    fn main_theorem_vacuous_for_equilibrium() {
        let ns = system(&[1.0, 0.0, 0.0, 1.0]);
        let f0 = DensityState::Mixture(GaussianMixture::standard(2));
        let mut opts = TrajectoryOptions::new(2.0, DMatrix::identity(2, 2), default_time_grid(15.0, 20).unwrap());
        opts.grid_degree = Some(10);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        let rep = check_main_theorems(&traj).unwrap();
        assert!(rep.fit.is_none());
        assert!(rep.records.iter().all(|r| r.passed));
    }

    #[test]
    fn lower_bound_for_equilibrium() {
        let ns = system(&[1.0, 0.0, 0.0, 1.0]);
        let f0 = DensityState::Mixture(GaussianMixture::standard(2));
        let mut opts = TrajectoryOptions::new(2.0, DMatrix::identity(2, 2), vec![0.0]);
        opts.grid_degree = Some(10);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        let t = traj.bounds.t_hat_1(0.5).unwrap();
        let rep = check_lower_bound(&traj, 0.5, 0.25, &[t, t + 1.0], 17, 4.0).unwrap();
        assert!(rep.constant < 1.0 / (2.0 * std::f64::consts::PI));
        assert!(rep.records.iter().all(|r| r.passed));
        assert!(check_lower_bound(&traj, 0.5, 0.25, &[0.0], 5, 4.0).is_err());
    }

    #[test]
    fn box_grid_corners() {
        let b = box_grid(2, 65, 4.0);
        assert_eq!(b.len(), 65 * 65);
        assert_eq!(b[0], vec![-4.0, -4.0]);
        assert_eq!(b[64], vec![-4.0, 4.0]);
        assert_eq!(b[32 * 65 + 32], vec![0.0, 0.0]);
    }

    #[test]
    fn contractivity_for_equilibrium_is_trivial() {
        let ns = system(&[1.0, 0.0, 0.0, 1.0]);
        let f0 = DensityState::Mixture(GaussianMixture::standard(2));
        let mut opts = TrajectoryOptions::new(2.0, DMatrix::identity(2, 2), vec![0.0]);
        opts.grid_degree = Some(10);
        let traj = run_trajectory(&ns, &f0, &f0, &opts).unwrap();
        let t1 = traj.bounds.t1(2.0).unwrap();
        let rep = check_contractivity(&traj, 2.0, 2.0, 0.5, &[1.0], &[t1, t1 + 5.0]).unwrap();
        assert_relative_eq!(rep.a_const, 3072.0 / 9.0, max_relative = 1e-14);
        let l2: Vec<_> = rep.records.iter().filter(|r| r.check == "contractivity_l2").collect();
        assert!(l2.iter().all(|r| (r.lhs - 1.0).abs() < 1e-12));
        assert!(rep.records.iter().all(|r| r.passed));
    }

    #[test]
    fn report_summary_counts() {
        let mut rep = TrajectoryReport::default();
        rep.extend([
            CheckRecord::new("a", 0.0, 1.0, 2.0, 0.0),
            CheckRecord::new("a", 1.0, 3.0, 2.0, 0.0),
            CheckRecord::new("b", 0.0, 0.0, 0.0, 0.0),
        ]);
        assert!(!rep.passed());
        let s = rep.summary();
        assert_eq!(s[0], ("a".to_string(), 2, 1, -1.0));
        assert_eq!(s[1].2, 0);
    }
}
