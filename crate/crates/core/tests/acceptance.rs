//! Acceptance suite: one test per criterion, each printing its measured values.

use std::time::{Duration, Instant};

use hypodecay_core::functionals::{entropy_p, fisher_p, PEntropy, QuadratureGrid};
use hypodecay_core::matrix::{
    analyze_drift_spectrum, build_certificate, normalize_system, FPSystem, NormalizedSystem,
};
use hypodecay_core::nonquadratic::{
    check_condition_a1, check_condition_a1_on, verify_generalized_fisher_decay_1d, FpSolver,
    FpSolverOptions, ScalarDiffusionProblem,
};
use hypodecay_core::propagator::{
    DensityState, GaussianComponent, GaussianMixture, HermiteExpansion, Propagator,
};
use hypodecay_core::spectral::check_vm_spectrum;
use hypodecay_core::verifier::{
    check_contractivity, check_fisher_differential, check_improved_decay, check_interpolation,
    check_log_sobolev, check_lower_bound, check_main_theorems, default_time_grid, run_trajectory,
    Trajectory, TrajectoryOptions, FD_STEP,
};
use hypodecay_core::Result;
use nalgebra::{DMatrix, DVector};

type Criterion = fn() -> Result<Outcome>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

fn normalized(d: DMatrix<f64>, c: DMatrix<f64>) -> Result<NormalizedSystem> {
    normalize_system(&FPSystem::new(d, c, 1e-9)?)
}

fn sys_a() -> Result<NormalizedSystem> {
    normalized(DMatrix::identity(2, 2), DMatrix::identity(2, 2))
}

fn sys_b() -> Result<NormalizedSystem> {
    normalized(DMatrix::identity(2, 2), mat(2, &[1.0, 1.0, 0.0, 1.0]))
}

fn gaussian(mean: &[f64], var: f64) -> DensityState {
    let d = mean.len();
    DensityState::Mixture(GaussianMixture::gaussian(mean, DMatrix::identity(d, d) * var).unwrap())
}

fn shifted(mean: &[f64]) -> DensityState {
    DensityState::Mixture(GaussianMixture::shifted(mean))
}

fn trajectory(
    ns: &NormalizedSystem,
    f0: &DensityState,
    g0: &DensityState,
    p: f64,
    pm: DMatrix<f64>,
    times: Vec<f64>,
) -> Result<Trajectory> {
    run_trajectory(ns, f0, g0, &TrajectoryOptions::new(p, pm, times))
}

// 1. Lyapunov solve and normalized invariants.
fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let systems = [
        ("SYS-A", DMatrix::identity(2, 2), DMatrix::identity(2, 2)),
        ("SYS-B", DMatrix::identity(2, 2), mat(2, &[1.0, 1.0, 0.0, 1.0])),
        ("SYS-C", mat(1, &[2.0]), mat(1, &[4.0])),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, d, c) in systems {
        let ns = normalized(d, c.clone())?;
        // Power traces fix the characteristic polynomial and stay well
        // conditioned for defective drifts.
        let n = c.nrows();
        let (mut pc, mut pt) = (DMatrix::identity(n, n), DMatrix::identity(n, n));
        let mut spectrum: f64 = 0.0;
        for _ in 0..n {
            pc = &pc * &c;
            pt = &pt * &ns.c_tilde;
            spectrum = spectrum.max((pc.trace() - pt.trace()).abs() / pc.trace().abs().max(1.0));
        }
        let defect = ns.symmetric_defect().max(ns.off_diagonal()).max(spectrum);
        ok &= ns.lyapunov_residual <= 1e-10 && defect <= 1e-8;
        parts.push(format!("{name} residual {:.1e} invariants {:.1e}", ns.lyapunov_residual, defect));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    Ok(outcome(ok, format!("{}; {:.2?}", parts.join(", "), elapsed)))
}

// 2. Quadrature against closed forms for shifted Gaussians.
fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for d in [1usize, 2] {
        let grid = QuadratureGrid::default_for(d)?;
        let id = DMatrix::identity(d, d);
        for r in [0.25, 0.5, 1.0] {
            let mut m = vec![0.0; d];
            m[0] = r * 0.6;
            if d == 2 {
                m[1] = r * 0.8;
            } else {
                m[0] = r;
            }
            let f = shifted(&m);
            let s = r * r;
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            worst = worst
                .max(rel(entropy_p(&f, 2.0, &grid)?, (s.exp() - 1.0) / 2.0))
                .max(rel(fisher_p(&f, 2.0, &id, &grid)?, s * s.exp()))
                .max(rel(fisher_p(&f, 1.0, &id, &grid)?, s));
        }
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("worst relative error {worst:.2e}; {elapsed:.2?}"),
    ))
}

// 3. Spectrum of the generator on each polynomial degree block.
fn criterion_3() -> Result<Outcome> {
    let cases = [
        ("SYS-A", sys_a()?),
        ("SYS-B", sys_b()?),
        ("diag(1,2)", normalized(DMatrix::identity(2, 2), mat(2, &[1.0, 0.0, 0.0, 2.0]))?),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, ns) in &cases {
        let rep = check_vm_spectrum(&ns.d_tilde, &ns.c_tilde, 3, 1e-8)?;
        let err = rep.blocks.iter().map(|b| b.max_mean_error).fold(0.0, f64::max);
        ok &= rep.passes();
        parts.push(format!(
            "{name} max error {err:.1e}, degree-1 block = -C: {}",
            rep.degree_one_is_minus_c
        ));
    }
    Ok(outcome(ok, parts.join("; ")))
}

// 4. Generalized Fisher decay along pairs with a certified weight.
fn criterion_4() -> Result<Outcome> {
    let start = Instant::now();
    let mix = DensityState::Mixture(GaussianMixture::new(vec![
        GaussianComponent::new(0.5, DVector::from_vec(vec![1.0, 0.0]), DMatrix::identity(2, 2))?,
        GaussianComponent::new(0.5, DVector::from_vec(vec![-1.0, 0.5]), DMatrix::identity(2, 2) * 0.7)?,
    ])?);
    let pairs = [
        (shifted(&[0.5, 0.0]), gaussian(&[-0.3, 0.4], 0.8)),
        (mix, shifted(&[0.0, 1.0])),
    ];
    let times = default_time_grid(5.0, 50)?;
    let mut ok = true;
    let mut records = 0;
    let mut worst = f64::INFINITY;
    for ns in [sys_a()?, sys_b()?] {
        let pm = build_certificate(&ns.c_tilde, 0.25, 1e-9)?.normalized().p;
        for (f0, g0) in &pairs {
            for p in [1.0, 1.5, 2.0] {
                let traj = trajectory(&ns, f0, g0, p, pm.clone(), times.clone())?;
                for r in check_fisher_differential(&traj, traj.lambda, FD_STEP)? {
                    ok &= r.passed;
                    worst = worst.min(r.margin());
                    records += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    Ok(outcome(ok, format!("{records} records, worst margin {worst:.2e}; {elapsed:.2?}")))
}

fn improved_trajectory() -> Result<Trajectory> {
    let g0 = DensityState::Hermite(HermiteExpansion::from_unnormalized(2, 2, &[(vec![2, 0], 1.0)])?);
    let times = (0..=60).map(|k| 0.05 * k as f64).collect();
    trajectory(&sys_a()?, &shifted(&[0.5, 0.0]), &g0, 2.0, DMatrix::identity(2, 2), times)
}

// 5. Improved decay rate of the identity-weighted Fisher information.
fn criterion_5() -> Result<Outcome> {
    let traj = improved_trajectory()?;
    let rep = check_improved_decay(&traj, traj.lambda, traj.d_min, (0.5, 3.0))?;
    let ok = (rep.slope + 4.0).abs() <= 0.02 && rep.records.iter().all(|r| r.passed);
    Ok(outcome(
        ok,
        format!("log-slope {:.6} (rate 2(lambda+d_min) = {})", rep.slope, rep.rate),
    ))
}

fn acceptance_trajectories() -> Result<Vec<Trajectory>> {
    let a = sys_a()?;
    let b = sys_b()?;
    let id = DMatrix::identity(2, 2);
    let cert = build_certificate(&b.c_tilde, 0.25, 1e-9)?.normalized().p;
    let grid15 = default_time_grid(15.0, 61)?;
    let grid6 = default_time_grid(6.0, 25)?;
    Ok(vec![
        trajectory(&a, &shifted(&[0.5, 0.0]), &shifted(&[0.5, 0.0]), 2.0, id.clone(), grid15.clone())?,
        trajectory(&a, &shifted(&[0.5, 0.0]), &gaussian(&[0.0, 0.3], 0.8), 1.5, id.clone(), grid6.clone())?,
        trajectory(&b, &shifted(&[0.0, 0.5]), &shifted(&[0.0, 0.5]), 2.0, cert.clone(), grid15)?,
        trajectory(&b, &gaussian(&[1.0, 0.0], 1.5), &shifted(&[0.3, -0.2]), 1.0, cert, grid6)?,
        improved_trajectory()?,
    ])
}

// 6. Interpolation between the p = 1 and p = 2 Fisher informations.
fn criterion_6() -> Result<Outcome> {
    let exact = PEntropy::new(1.5)?.interpolation_constant();
    let mut ok = exact == 2.0;
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for traj in acceptance_trajectories()? {
        for s in &traj.samples {
            let (f, g) = traj.states_at(s.t)?;
            for p in [1.1, 1.5, 1.9] {
                let c = check_interpolation(&f, &g, p, &traj.pm, &traj.grid)?;
                ok &= c.passed;
                if c.rhs > 0.0 {
                    worst = worst.max(c.lhs / c.rhs);
                }
                count += 1;
            }
        }
    }
    Ok(outcome(
        ok,
        format!("{count} checks, max lhs/rhs {worst:.6}, constant at p=1.5 is {exact}"),
    ))
}

// 7. Contractivity estimates after the explicit times.
fn criterion_7() -> Result<Outcome> {
    let ns = sys_a()?;
    let f0 = shifted(&[0.5, 0.0]);
    let mut ok = true;
    let mut parts = Vec::new();
    for p2 in [1.5, 2.0] {
        let traj = trajectory(&ns, &f0, &f0, 2.0, DMatrix::identity(2, 2), default_time_grid(1.0, 4)?)?;
        let a2 = traj.bounds.a_const(2.0)?;
        ok &= (a2 - 3072.0 / 9.0).abs() <= 1e-12 * a2;
        let b = &traj.bounds;
        let start = b.t1(p2)?.max(b.t1_hypo(2.0, p2, 0.5)?).max(b.tau3()?);
        let times: Vec<f64> = (0..10).map(|k| start * (1.0 + 0.1 * k as f64)).collect();
        let rep = check_contractivity(&traj, 2.0, p2, 0.5, &[1.0, 1.5], &times)?;
        let failed = rep.records.iter().filter(|r| !r.passed).count();
        ok &= failed == 0 && !rep.records.is_empty();
        parts.push(format!(
            "p2={p2}: t1={:.3}, {} records, {failed} failed, sensitive={}",
            rep.times.t1,
            rep.records.len(),
            rep.constant_sensitive
        ));
    }
    Ok(outcome(ok, parts.join("; ")))
}

// 8. Pointwise Gaussian lower bound.
fn criterion_8() -> Result<Outcome> {
    let ns = sys_a()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f0) in [("f_inf", shifted(&[0.0, 0.0])), ("N((1,0),0.5I)", gaussian(&[1.0, 0.0], 0.5))] {
        let probe = trajectory(&ns, &f0, &f0, 2.0, DMatrix::identity(2, 2), vec![0.0])?;
        let t_hat = probe.bounds.t_hat_1(0.5)?;
        let times: Vec<f64> = (0..5).map(|k| t_hat + 0.5 * k as f64).collect();
        let rep = check_lower_bound(&probe, 0.5, 0.25, &times, 65, 4.0)?;
        ok &= rep.records.len() == 5 && rep.records.iter().all(|r| r.passed);
        parts.push(format!("{name}: C={:.3e}, t_hat_1={t_hat:.3}", rep.constant));
    }
    Ok(outcome(ok, parts.join("; ")))
}

// 9. Sharp rate: polynomial correction for the defective drift.
fn criterion_9() -> Result<Outcome> {
    let start = Instant::now();
    let grid = default_time_grid(15.0, 121)?;
    let b = sys_b()?;
    let cert = build_certificate(&b.c_tilde, 0.25, 1e-9)?.normalized().p;
    let f0 = shifted(&[0.0, 0.5]);
    let tb = trajectory(&b, &f0, &f0, 2.0, cert, grid.clone())?;
    let rb = check_main_theorems(&tb)?;
    let order = rb.fit.as_ref().map_or(f64::NAN, |f| f.poly_order_fit);
    let f0 = shifted(&[0.5, 0.0]);
    let ta = trajectory(&sys_a()?, &f0, &f0, 2.0, DMatrix::identity(2, 2), grid)?;
    let ra = check_main_theorems(&ta)?;
    let rate = ra.fit.as_ref().map_or(f64::NAN, |f| f.rate_fit);
    let mu = analyze_drift_spectrum(&sys_a()?.c_tilde, 1e-9)?.mu;
    let bounded = |r: &hypodecay_core::verifier::MainTheoremReport| {
        r.envelope_sup_entropy.is_finite() && r.envelope_tail_slope <= 0.5
    };
    let elapsed = start.elapsed();
    let ok = (1.6..=2.4).contains(&order)
        && ((rate - 2.0 * mu) / (2.0 * mu)).abs() <= 0.02
        && bounded(&ra)
        && bounded(&rb)
        && elapsed < Duration::from_secs(300);
    Ok(outcome(
        ok,
        format!(
            "SYS-B order {order:.3}, SYS-A rate {rate:.4} vs {:.1}, envelope sup {:.3}/{:.3}; {elapsed:.2?}",
            2.0 * mu,
            ra.envelope_sup_entropy,
            rb.envelope_sup_entropy
        ),
    ))
}

// 10. Log-Sobolev inequality and its equality case.
fn criterion_10() -> Result<Outcome> {
    let mut ok = true;
    let mut count = 0;
    for traj in acceptance_trajectories()? {
        for r in check_log_sobolev(&traj) {
            ok &= r.passed;
            count += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for d in [1usize, 2] {
        let grid = QuadratureGrid::default_for(d)?;
        for r in [0.25, 0.5, 1.0] {
            let mut m = vec![0.0; d];
            m[d - 1] = r;
            let f = shifted(&m);
            let e = entropy_p(&f, 1.0, &grid)?;
            let i = fisher_p(&f, 1.0, &DMatrix::identity(d, d), &grid)?;
            worst = worst.max((e - 0.5 * i).abs() / e);
        }
    }
    ok &= worst <= 1e-6;
    Ok(outcome(ok, format!("{count} samples; equality gap {worst:.2e}")))
}

// 11. Scalar diffusion with a non-quadratic potential.
fn criterion_11() -> Result<Outcome> {
    let start = Instant::now();
    let ou = ScalarDiffusionProblem::parse(1, "x^2/2", "1")?;
    let l_ou = check_condition_a1(&ou)?.lambda1;

    let solver = FpSolver::new(&ou, FpSolverOptions { cells: 2048, ..Default::default() })?;
    let g = &solver.grid;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let f0: Vec<f64> = g.x.iter().map(|x| (-0.5 * (x - 0.5) * (x - 0.5)).exp() / norm).collect();
    let sol = solver.solve_density(&f0, &[1.0])?;
    let exact = Propagator::from_matrices(DMatrix::identity(1, 1), DMatrix::identity(1, 1))
        .evolve(&shifted(&[0.5]), 1.0)?;
    let l1: f64 = g.h
        * g.x
            .iter()
            .zip(sol.density(g, 0))
            .map(|(x, v)| (v - exact.density(&[*x])).abs())
            .sum::<f64>();

    let prob = ScalarDiffusionProblem::parse(1, "x^2/2 + 0.1*x^4", "1 + 0.2/(1 + x^2)")?;
    let a1 = check_condition_a1(&prob)?;
    let fine = check_condition_a1_on(&prob, 10 * (prob.a1_points - 1) + 1)?;
    let solver = FpSolver::new(&prob, FpSolverOptions::default())?;
    let rf: Vec<f64> = solver.grid.x.iter().map(|x| 1.0 + 0.5 * x.sin()).collect();
    let rg: Vec<f64> = solver.grid.x.clone();
    let times: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
    let rep = verify_generalized_fisher_decay_1d(&solver, &rf, &rg, 1.5, &times, a1.lambda1)?;
    let elapsed = start.elapsed();
    let ok = l_ou == 1.0
        && l1 <= 1e-4
        && a1.certified()
        && (a1.lambda1 - fine.lambda1).abs() <= 1e-4
        && rep.passed()
        && elapsed < Duration::from_secs(120);
    Ok(outcome(
        ok,
        format!(
            "OU lambda1 = {l_ou}, L1 error {l1:.2e}, perturbed lambda1 = {:.6}, decay {}; {elapsed:.2?}",
            a1.lambda1,
            if rep.passed() { "holds" } else { "violated" }
        ),
    ))
}

/// Prints the criterion line and fails the test if it did not pass.
fn run(k: usize, name: &str, criterion: Criterion) {
    let out = criterion().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    println!(
        "criterion {k:>2} {name:<24} {}  {}",
        if out.passed { "PASS" } else { "FAIL" },
        out.detail
    );
    assert!(out.passed, "criterion {k} ({name}) failed: {}", out.detail);
}

#[test]
fn criterion_01_normalization() {
    run(1, "normalization", criterion_1);
}

#[test]
fn criterion_02_oracle_equivalence() {
    run(2, "oracle equivalence", criterion_2);
}

#[test]
fn criterion_03_spectral_consistency() {
    run(3, "spectral consistency", criterion_3);
}

#[test]
fn criterion_04_fisher_decay() {
    run(4, "fisher decay", criterion_4);
}

#[test]
fn criterion_05_improved_decay() {
    run(5, "improved decay", criterion_5);
}

#[test]
fn criterion_06_interpolation() {
    run(6, "interpolation", criterion_6);
}

#[test]
fn criterion_07_contractivity() {
    run(7, "contractivity", criterion_7);
}

#[test]
fn criterion_08_lower_bound() {
    run(8, "lower bound", criterion_8);
}

#[test]
fn criterion_09_sharpness() {
    run(9, "sharpness", criterion_9);
}

#[test]
fn criterion_10_log_sobolev() {
    run(10, "log sobolev", criterion_10);
}

#[test]
fn criterion_11_nonquadratic_potential() {
    run(11, "nonquadratic potential", criterion_11);
}
