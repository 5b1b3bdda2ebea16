//! The five subcommands. Each returns its exit code and the text for stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hypodecay_core::matrix::{
    analyze_drift_spectrum, build_certificate, normalize_system, validate_system, Certificate,
    FPSystem, NormalizedSystem, SpectralData,
};
use hypodecay_core::nonquadratic::{
    check_condition_a1, check_condition_a1_on, verify_generalized_fisher_decay_1d, A1Report,
    FpSolver, FpSolverOptions, ScalarDiffusionProblem,
};
use hypodecay_core::verifier::{
    check_contractivity, check_entropy_monotone, check_fisher_differential, check_improved_decay,
    check_interpolation, check_interpolation_traj, check_log_sobolev, check_lower_bound,
    check_main_theorems, check_splitting, default_time_grid, run_trajectory, CheckRecord,
    Trajectory, TrajectoryOptions, TrajectoryReport, FD_STEP, INTERPOLATION_SLACK,
};
use hypodecay_core::Error;
use nalgebra::DMatrix;

use crate::config::{Config, WeightMode};
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_PASS};
use crate::output::{g17, line_plot, Csv, OutDir, Series};

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid_degree: Option<usize>,
    pub nu: Option<f64>,
    pub out: Option<PathBuf>,
    pub seedless: bool,
}

#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

const IDENTITY_2D: &str = include_str!("../scenarios/identity_2d.cfg");
const DEFECTIVE_2D: &str = include_str!("../scenarios/defective_2d.cfg");
const APPENDIX_A: &str = include_str!("../scenarios/appendix_a.cfg");

/// Reads a scenario file, falling back to the bundled scenarios by name.
pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let name = path.to_string_lossy();
            match name.trim_end_matches(".cfg") {
                "identity_2d" => IDENTITY_2D.to_string(),
                "defective_2d" => DEFECTIVE_2D.to_string(),
                "appendix_a" => APPENDIX_A.to_string(),
                _ => return Err(CliError::Io(format!("cannot read {}: {e}", path.display()))),
            }
        }
    };
    Config::parse(&source)
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| g17(m[(i, j)])).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

struct SystemSetup {
    dim: usize,
    tolerance: f64,
    ns: NormalizedSystem,
    spectral: SpectralData,
}

fn load_system(cfg: &Config) -> Result<SystemSetup, CliError> {
    let dim = cfg.dim()?;
    let d = cfg.matrix("D", dim)?;
    let c = cfg.matrix("C", dim)?;
    let tolerance = cfg.f64_or("tolerance", hypodecay_core::matrix::DEFAULT_TOLERANCE)?;
    let sys = FPSystem::new(d, c, tolerance)?;
    let ns = normalize_system(&sys)?;
    let spectral = analyze_drift_spectrum(&ns.c_tilde, tolerance)?;
    Ok(SystemSetup {
        dim,
        tolerance,
        ns,
        spectral,
    })
}

fn spectral_summary(s: &SpectralData) -> String {
    let r_mu: Vec<String> = s.r_mu.iter().map(|z| {
            let sign = if z.im.is_sign_negative() { "-" } else { "+" };
            format!("{}{sign}{}i", g17(z.re), g17(z.im.abs()))
        }).collect();
    format!(
        "mu={}, defect n={}\nR_mu = [{}]\nc_tilde = {}\nc_hat = {}\n",
        g17(s.mu),
        s.n,
        r_mu.join(", "),
        g17(s.c_tilde),
        g17(s.c_hat)
    )
}

pub fn cmd_validate(cfg: &Config) -> Result<Outcome, CliError> {
    let dim = cfg.dim()?;
    let d = cfg.matrix("D", dim)?;
    let c = cfg.matrix("C", dim)?;
    let tolerance = cfg.f64_or("tolerance", hypodecay_core::matrix::DEFAULT_TOLERANCE)?;
    let report = validate_system(&d, &c, tolerance)?;
    let mut text = report.to_key_value();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if !report.accepted() {
        text.push_str("verdict = rejected\n");
        return Ok(Outcome { code: EXIT_CHECK_FAILED, text });
    }
    if report.rank_d < dim {
        writeln!(
            text,
            "note: rank_D={} < {dim}; the system is hypoelliptic only, and the improved decay estimate needs a non-degenerate D",
            report.rank_d
        )
        .unwrap();
    }
    let sys = FPSystem::new(d, c, tolerance)?;
    let ns = normalize_system(&sys)?;
    writeln!(text, "T = {}", fmt_matrix(&ns.t)).unwrap();
    writeln!(text, "D_tilde = {}", fmt_matrix(&ns.d_tilde)).unwrap();
    writeln!(text, "C_tilde = {}", fmt_matrix(&ns.c_tilde)).unwrap();
    writeln!(text, "K = {}", fmt_matrix(&ns.k)).unwrap();
    writeln!(text, "lyapunov_residual = {}", g17(ns.lyapunov_residual)).unwrap();
    let spectral = analyze_drift_spectrum(&ns.c_tilde, tolerance)?;
    text.push_str(&spectral_summary(&spectral));
    text.push_str("verdict = accepted\n");
    Ok(Outcome { code: EXIT_PASS, text })
}

fn certificate_for(setup: &SystemSetup, nu: f64) -> Result<Certificate, CliError> {
    Ok(build_certificate(&setup.ns.c_tilde, nu, setup.tolerance)?.normalized())
}

pub fn cmd_certify(cfg: &Config, ov: &Overrides) -> Result<Outcome, CliError> {
    let setup = load_system(cfg)?;
    let nu = match (ov.nu, cfg.weight_mode()?) {
        (Some(nu), _) => nu,
        (None, WeightMode::Certificate(nu)) => nu,
        (None, WeightMode::Identity) => 0.0,
    };
    let cert = certificate_for(&setup, nu)?;
    let valid = cert.is_valid(setup.tolerance);
    let mut text = String::new();
    writeln!(text, "frame = normalized").unwrap();
    writeln!(text, "nu = {}", g17(cert.nu)).unwrap();
    writeln!(text, "construction = {}", cert.construction).unwrap();
    writeln!(text, "P = {}", fmt_matrix(&cert.p)).unwrap();
    writeln!(text, "lambda = {}", g17(cert.lambda)).unwrap();
    writeln!(text, "p_min = {}", g17(cert.p_min)).unwrap();
    writeln!(text, "p_max = {}", g17(cert.p_max)).unwrap();
    writeln!(text, "lmi_residual = {}", g17(cert.lmi_residual)).unwrap();
    writeln!(text, "verdict = {}", if valid { "valid" } else { "invalid" }).unwrap();
    Ok(Outcome {
        code: if valid { EXIT_PASS } else { EXIT_CHECK_FAILED },
        text,
    })
}

struct Experiment {
    setup: SystemSetup,
    traj: Trajectory,
    weight: String,
    grid_degree: usize,
    t_max: f64,
    out: OutDir,
}

fn setup_experiment(cfg: &Config, ov: &Overrides) -> Result<Experiment, CliError> {
    let setup = load_system(cfg)?;
    let dim = setup.dim;
    let p = cfg.f64_or("p", 2.0)?;
    let mode = match ov.nu {
        Some(nu) => WeightMode::Certificate(nu),
        None => cfg.weight_mode()?,
    };
    let (pm, weight) = match mode {
        WeightMode::Identity => (DMatrix::identity(dim, dim), "identity".to_string()),
        WeightMode::Certificate(nu) => (certificate_for(&setup, nu)?.p, format!("certificate({})", g17(nu))),
    };
    let t_max = cfg.f64_or("t_max", 15.0 / setup.spectral.mu)?;
    let samples = cfg.opt_usize("samples")?.unwrap_or(120);
    let times = default_time_grid(t_max, samples).map_err(|e| CliError::Config {
        line: cfg.line_of("t_max").max(cfg.line_of("samples")),
        message: e.to_string(),
    })?;
    let frame = cfg.frame()?;
    let f0_spec = cfg.initial("f0", dim)?.ok_or_else(|| CliError::Config {
        line: 0,
        message: "missing required key \"f0\"".into(),
    })?;
    let f0 = f0_spec.resolve(dim, frame, &setup.ns.t)?;
    let g0 = match cfg.initial("g0", dim)? {
        Some(spec) => spec.resolve(dim, frame, &setup.ns.t)?,
        None => f0.clone(),
    };
    let mut opts = TrajectoryOptions::new(p, pm, times);
    opts.grid_degree = ov.grid_degree.or(cfg.opt_usize("grid_degree")?);
    let traj = run_trajectory(&setup.ns, &f0, &g0, &opts)?;
    let grid_degree = traj.grid.degree();
    let root = ov
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.string("out").unwrap_or_else(|| "out".into())));
    Ok(Experiment {
        setup,
        traj,
        weight,
        grid_degree,
        t_max,
        out: OutDir::create(&root)?,
    })
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let d = traj.f0.dim();
    let mut header: Vec<String> = [
        "t", "mass", "e_p", "e_2", "fisher_p", "fisher_p_identity", "gen_fisher_1", "gen_fisher_p",
        "fisher2_g", "fisher2_g_identity", "g_l2_sq", "e2_g", "fisher2_f2", "gen_fisher_p_f1",
        "gen_fisher_p_f2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=d).map(|i| format!("a{i}")));
    header.extend(
        ["norm_f1", "norm_f2_minus_finf", "exp_moment", "bound_fisher", "envelope", "bound_l2", "bound_fisher2"]
            .iter()
            .map(|s| s.to_string()),
    );
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    let mut samples: Vec<_> = traj.samples.iter().collect();
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    for s in samples {
        let mut row: Vec<f64> = vec![
            s.t, s.mass, s.e_p, s.e_2, s.fisher_p, s.fisher_p_identity, s.gen_fisher_1, s.gen_fisher_p,
            s.fisher2_g, s.fisher2_g_identity, s.g_l2_sq, s.e2_g, s.fisher2_f2, s.gen_fisher_p_f1,
            s.gen_fisher_p_f2,
        ];
        row.extend(&s.a);
        row.extend([
            s.norm_f1,
            s.norm_f2_minus_finf,
            s.exp_moment,
            s.bounds.fisher,
            s.bounds.envelope,
            s.bounds.l2,
            s.bounds.fisher2,
        ]);
        csv.row(&row.into_iter().map(g17).collect::<Vec<_>>());
    }
    csv.into_string()
}

fn trajectory_plots(traj: &Trajectory, annotation: Option<String>) -> (String, String) {
    let mut samples: Vec<_> = traj.samples.iter().collect();
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    let sup = samples
        .iter()
        .map(|s| s.e_p / s.bounds.envelope)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let title = match annotation {
        Some(a) => format!("Entropy and envelope ({a})"),
        None => "Entropy and envelope".to_string(),
    };
    let entropy = line_plot(
        &title,
        "t",
        "value",
        &[
            Series {
                name: "e_p(f(t))",
                color: "#1f77b4",
                points: samples.iter().map(|s| (s.t, s.e_p)).collect(),
            },
            Series {
                name: "sup-scaled envelope",
                color: "#d62728",
                points: samples.iter().map(|s| (s.t, sup * s.bounds.envelope)).collect(),
            },
        ],
        true,
    );
    let fisher = line_plot(
        "Generalized Fisher information",
        "t",
        "value",
        &[
            Series {
                name: "I_p^P(f, g)",
                color: "#1f77b4",
                points: samples.iter().map(|s| (s.t, s.gen_fisher_p)).collect(),
            },
            Series {
                name: "exponential bound",
                color: "#d62728",
                points: samples.iter().map(|s| (s.t, s.bounds.fisher)).collect(),
            },
        ],
        true,
    );
    (entropy, fisher)
}

fn manifest_entries(exp: &Experiment, ov: &Overrides) -> Vec<(String, String)> {
    let s = &exp.setup;
    vec![
        ("dim".into(), s.dim.to_string()),
        ("tolerance".into(), g17(s.tolerance)),
        ("grid_degree".into(), exp.grid_degree.to_string()),
        ("p".into(), g17(exp.traj.p)),
        ("P".into(), exp.weight.clone()),
        ("lambda".into(), g17(exp.traj.lambda)),
        ("mu".into(), g17(s.spectral.mu)),
        ("n".into(), s.spectral.n.to_string()),
        ("c_tilde".into(), g17(s.spectral.c_tilde)),
        ("c_hat".into(), g17(s.spectral.c_hat)),
        ("t_max".into(), g17(exp.t_max)),
        ("samples".into(), exp.traj.samples.len().to_string()),
        (
            "resolution_change".into(),
            exp.traj.resolution_change.map_or("skipped".into(), g17),
        ),
        ("fd_step".into(), g17(FD_STEP)),
        ("randomness".into(), if ov.seedless { "none (seedless)".into() } else { "none".into() }),
    ]
}

pub fn cmd_simulate(cfg: &Config, ov: &Overrides) -> Result<Outcome, CliError> {
    let mut exp = setup_experiment(cfg, ov)?;
    exp.out.write("trajectory.csv", &trajectory_csv(&exp.traj))?;
    let (entropy, fisher) = trajectory_plots(&exp.traj, None);
    exp.out.write("entropy.svg", &entropy)?;
    exp.out.write("fisher.svg", &fisher)?;
    let entries = manifest_entries(&exp, ov);
    exp.out.write_manifest(&cfg.source, &entries)?;
    let text = format!(
        "{}samples = {}\nwrote {}\n",
        spectral_summary(&exp.setup.spectral),
        exp.traj.samples.len(),
        exp.out.root.display()
    );
    Ok(Outcome { code: EXIT_PASS, text })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1).max(1) as f64).collect()
}

/// Runs one named check, appending records and notes.
fn run_check(
    name: &str,
    exp: &Experiment,
    cfg: &Config,
    report: &mut TrajectoryReport,
    notes: &mut Vec<String>,
) -> Result<(), Error> {
    let traj = &exp.traj;
    match name {
        "entropy_monotone" => report.extend(check_entropy_monotone(traj)),
        "log_sobolev" => report.extend(check_log_sobolev(traj)),
        "splitting" => report.extend(check_splitting(traj)),
        "fisher_decay" => {
            report.extend(check_fisher_differential(traj, traj.lambda, FD_STEP)?);
            notes.push(format!("fisher_decay: rate lambda = {} certified for P", g17(traj.lambda)));
        }
        "improved_decay" => {
            let window = (0.5f64.min(exp.t_max / 6.0), 3.0f64.min(exp.t_max));
            let rep = check_improved_decay(traj, traj.lambda, traj.d_min, window)?;
            report.extend(rep.records);
            report.checks.push(CheckRecord::new(
                "improved_decay_slope",
                window.1,
                rep.slope,
                -rep.rate,
                0.02 * rep.rate,
            ));
            notes.push(format!(
                "improved_decay: log-slope {} on [{}, {}], rate 2(lambda + d_min) = {}",
                g17(rep.slope),
                g17(window.0),
                g17(window.1),
                g17(rep.rate)
            ));
        }
        "interpolation" => {
            report.extend(check_interpolation_traj(traj)?);
            let mut skipped = 0;
            for s in &traj.samples {
                let (f, g) = traj.states_at(s.t)?;
                for p in [1.1, 1.5, 1.9] {
                    match check_interpolation(&f, &g, p, &traj.pm, &traj.grid) {
                        Ok(c) => report.checks.push(CheckRecord::new(
                            format!("interpolation_p{p}"),
                            s.t,
                            c.lhs,
                            c.rhs.min(c.general_rhs),
                            INTERPOLATION_SLACK * c.rhs.min(c.general_rhs) + 1e-300,
                        )),
                        Err(Error::Precondition(_)) | Err(Error::SingularIntegrand { .. }) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
            if skipped > 0 {
                notes.push(format!("interpolation: {skipped} (state, p) pairs skipped for infinite functionals"));
            }
        }
        "contractivity" => {
            let p1 = if traj.p > 1.0 { traj.p } else { 2.0 };
            let p2 = traj.p2;
            let eta = cfg.f64_or("eta", 0.5).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let b = &traj.bounds;
            let latest = b.t1(p2)?.max(b.t1_hypo(p1, p2, eta)?).max(b.tau3()?);
            let times = linspace(latest, (2.0 * latest).max(exp.t_max), 10);
            let mut p_list = vec![1.0];
            if traj.p > 1.0 && traj.p < 2.0 {
                p_list.push(traj.p);
            }
            let rep = check_contractivity(traj, p1, p2, eta, &p_list, &times)?;
            report.extend(rep.records.clone());
            notes.push(format!(
                "contractivity: p1 = {}, p2 = {}, eta = {}, A = {}, B = {}, t1(p2) = {}, t1(p1,p2,eta) = {}, tau3 = {}",
                g17(p1),
                g17(p2),
                g17(eta),
                g17(rep.a_const),
                g17(rep.b_const),
                g17(rep.times.t1),
                g17(rep.times.t1_hypo),
                g17(rep.times.tau3)
            ));
            for s in &rep.sensitivity {
                notes.push(format!(
                    "contractivity: constants x{}: t1 = {}, t1(p1,p2,eta) = {}, tau3 = {}",
                    g17(s.scale),
                    g17(s.t1),
                    g17(s.t1_hypo),
                    g17(s.tau3)
                ));
            }
            notes.push(format!(
                "contractivity: earliest scanned passing time {}, constant-estimate sensitive: {}",
                rep.earliest_pass.map_or("none".into(), g17),
                if rep.constant_sensitive { "yes" } else { "no" }
            ));
        }
        "lower_bound" => {
            let eta = cfg.f64_or("eta", 0.5).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let eps = cfg.f64_or("eps", 0.25).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let t_hat = traj.bounds.t_hat_1(eta)?;
            let times = linspace(t_hat, (2.0 * t_hat).max(exp.t_max), 5);
            let rep = check_lower_bound(traj, eta, eps, &times, 65, 4.0)?;
            notes.push(format!(
                "lower_bound: C = {}, moment = {}, t_hat_1 = {}, earliest scanned pass {}",
                g17(rep.constant),
                g17(rep.moment),
                g17(rep.time),
                rep.earliest_pass.map_or("none".into(), g17)
            ));
            for (r, x) in rep.records.iter().zip(&rep.worst_points) {
                notes.push(format!(
                    "lower_bound: t = {} worst point {:?} bound {} density {}",
                    g17(r.t),
                    x.iter().map(|v| g17(*v)).collect::<Vec<_>>(),
                    g17(r.lhs),
                    g17(r.rhs)
                ));
            }
            report.extend(rep.records);
        }
        "main_theorem" => {
            let rep = check_main_theorems(traj)?;
            if let Some(fit) = &rep.fit {
                report.fits.push((format!("main_theorem {}", rep.fitted), fit.clone()));
                notes.push(format!(
                    "main_theorem: fitted {} rate {} order {} on [{}, {}] residual {}",
                    rep.fitted,
                    g17(fit.rate_fit),
                    g17(fit.poly_order_fit),
                    g17(fit.window.0),
                    g17(fit.window.1),
                    g17(fit.residual)
                ));
            }
            notes.push(format!(
                "main_theorem: envelope sup entropy {}, fisher {}, tail slope {}, tau0 = {}",
                g17(rep.envelope_sup_entropy),
                g17(rep.envelope_sup_fisher),
                g17(rep.envelope_tail_slope),
                g17(rep.tau0)
            ));
            report.warnings.extend(rep.warnings);
            report.extend(rep.records);
        }
        other => return Err(Error::InvalidInput(format!("unknown check {other}"))),
    }
    Ok(())
}

fn checks_csv(report: &TrajectoryReport) -> String {
    let mut csv = Csv::new(&["check", "t", "lhs", "rhs", "slack", "margin", "passed"]);
    for c in &report.checks {
        csv.row(&[
            c.check.clone(),
            g17(c.t),
            g17(c.lhs),
            g17(c.rhs),
            g17(c.slack),
            g17(c.margin()),
            (if c.passed { "1" } else { "0" }).to_string(),
        ]);
    }
    csv.into_string()
}

pub fn cmd_verify(cfg: &Config, ov: &Overrides) -> Result<Outcome, CliError> {
    let checks = cfg.checks()?;
    let mut exp = setup_experiment(cfg, ov)?;
    let mut report = TrajectoryReport::default();
    let mut notes = Vec::new();
    let mut errors: Vec<(String, String)> = Vec::new();
    for name in &checks {
        match run_check(name, &exp, cfg, &mut report, &mut notes) {
            Ok(()) => {}
            Err(e @ Error::UnderResolved(_)) => return Err(e.into()),
            Err(e) => errors.push((name.clone(), e.to_string())),
        }
    }
    let passed = report.passed() && errors.is_empty();

    let mut text = String::new();
    writeln!(text, "hypodecay verification report").unwrap();
    writeln!(text, "config_sha256 = {}", crate::output::sha256_hex(cfg.source.as_bytes())).unwrap();
    writeln!(text, "dim = {}", exp.setup.dim).unwrap();
    writeln!(text, "C_tilde = {}", fmt_matrix(&exp.setup.ns.c_tilde)).unwrap();
    writeln!(text, "D_tilde = {}", fmt_matrix(&exp.setup.ns.d_tilde)).unwrap();
    text.push_str(&spectral_summary(&exp.setup.spectral));
    writeln!(text, "p = {}, P = {}, lambda = {}", g17(exp.traj.p), exp.weight, g17(exp.traj.lambda)).unwrap();
    writeln!(text, "P matrix = {}", fmt_matrix(&exp.traj.pm)).unwrap();
    writeln!(text, "grid_degree = {}", exp.grid_degree).unwrap();
    writeln!(text, "\ncheck, records, failures, worst margin").unwrap();
    for (name, n, fails, margin) in report.summary() {
        writeln!(text, "{name}, {n}, {fails}, {}", g17(margin)).unwrap();
    }
    if !errors.is_empty() {
        writeln!(text, "\nprecondition failures").unwrap();
        for (name, e) in &errors {
            writeln!(text, "{name}: {e}").unwrap();
        }
    }
    if !notes.is_empty() {
        writeln!(text, "\nnotes").unwrap();
        for n in &notes {
            writeln!(text, "{n}").unwrap();
        }
    }
    if !report.warnings.is_empty() {
        writeln!(text, "\nwarnings").unwrap();
        for w in &report.warnings {
            writeln!(text, "{w}").unwrap();
        }
    }
    writeln!(text, "\nverdict = {}", if passed { "PASS" } else { "FAIL" }).unwrap();

    exp.out.write("trajectory.csv", &trajectory_csv(&exp.traj))?;
    exp.out.write("checks.csv", &checks_csv(&report))?;
    exp.out.write("report.txt", &text)?;
    let annotation = report.fits.first().map(|(_, fit)| {
        format!("fitted order {:.3}, rate {:.4}", fit.poly_order_fit, fit.rate_fit)
    });
    let (entropy, fisher) = trajectory_plots(&exp.traj, annotation);
    exp.out.write("entropy.svg", &entropy)?;
    exp.out.write("fisher.svg", &fisher)?;
    let mut entries = manifest_entries(&exp, ov);
    entries.push(("checks".into(), checks.join(",")));
    exp.out.write_manifest(&cfg.source, &entries)?;
    Ok(Outcome {
        code: if passed { EXIT_PASS } else { EXIT_CHECK_FAILED },
        text,
    })
}

fn parse_problem(cfg: &Config, dim: usize) -> Result<ScalarDiffusionProblem, CliError> {
    let (phi_line, phi) = cfg.required_string("phi")?;
    let (d_line, diffusion) = cfg.required_string("diffusion")?;
    let as_config = |line: usize, key: &'static str| {
        move |e: Error| CliError::Config {
            line,
            message: format!("{key}: {e}"),
        }
    };
    let phi = hypodecay_core::nonquadratic::ScalarField::parse(&phi, dim).map_err(as_config(phi_line, "phi"))?;
    let diffusion = hypodecay_core::nonquadratic::ScalarField::parse(&diffusion, dim)
        .map_err(as_config(d_line, "diffusion"))?;
    let mut prob = ScalarDiffusionProblem::new(dim, phi, diffusion)?;
    if let Some(points) = cfg.opt_usize("a1_points")? {
        prob = prob.with_a1_points(points).map_err(as_config(cfg.line_of("a1_points"), "a1_points"))?;
    }
    Ok(prob)
}

fn a1_text(coarse: &A1Report, fine: Option<&A1Report>) -> String {
    let mut s = String::new();
    writeln!(s, "lambda1 = {}", g17(coarse.lambda1)).unwrap();
    writeln!(
        s,
        "worst_point = [{}]",
        coarse.worst_point.iter().map(|v| g17(*v)).collect::<Vec<_>>().join(", ")
    )
    .unwrap();
    writeln!(s, "points_per_axis = {}", coarse.points_per_axis).unwrap();
    writeln!(s, "half_width = {}", g17(coarse.half_width)).unwrap();
    if let Some(f) = fine {
        writeln!(s, "refined_lambda1 = {}", g17(f.lambda1)).unwrap();
        writeln!(s, "refined_points_per_axis = {}", f.points_per_axis).unwrap();
        writeln!(s, "refinement_change = {}", g17((coarse.lambda1 - f.lambda1).abs())).unwrap();
    }
    writeln!(s, "certified = {}", if coarse.certified() { "yes" } else { "no" }).unwrap();
    s
}

pub fn cmd_appendix_a(cfg: &Config, ov: &Overrides) -> Result<Outcome, CliError> {
    let dim = if cfg.has("dim") { cfg.dim()? } else { 1 };
    let prob = parse_problem(cfg, dim)?;
    let coarse = check_condition_a1(&prob)?;
    let fine = if dim == 1 {
        Some(check_condition_a1_on(&prob, 10 * (prob.a1_points - 1) + 1)?)
    } else {
        None
    };
    let root = ov
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.string("out").unwrap_or_else(|| "out".into())));
    let mut out = OutDir::create(&root)?;
    let mut a1 = a1_text(&coarse, fine.as_ref());
    let mut entries = vec![
        ("dim".to_string(), dim.to_string()),
        ("a1_points".to_string(), prob.a1_points.to_string()),
        ("lambda1".to_string(), g17(coarse.lambda1)),
        ("randomness".to_string(), if ov.seedless { "none (seedless)".into() } else { "none".into() }),
    ];
    if !coarse.certified() || dim != 1 {
        if dim != 1 {
            a1.push_str("decay verification runs in one dimension only; skipped\n");
        } else {
            a1.push_str("rate condition not certified; decay estimate not applicable\n");
        }
        out.write("a1_report.txt", &a1)?;
        out.write_manifest(&cfg.source, &entries)?;
        let code = if coarse.certified() { EXIT_PASS } else { EXIT_CHECK_FAILED };
        return Ok(Outcome { code, text: a1 });
    }

    let defaults = FpSolverOptions::default();
    let opts = FpSolverOptions {
        cells: cfg.opt_usize("cells")?.unwrap_or(defaults.cells),
        dt: cfg.f64_or("dt", defaults.dt)?,
        ..defaults
    };
    let solver = FpSolver::new(&prob, opts)?;
    let ratio = |key: &str, default: &str| -> Result<Vec<f64>, CliError> {
        let src = cfg.string(key).unwrap_or_else(|| default.to_string());
        let e = hypodecay_core::nonquadratic::Expr::parse(&src, &["x"]).map_err(|e| CliError::Config {
            line: cfg.line_of(key),
            message: format!("{key}: {e}"),
        })?;
        Ok(solver.grid.x.iter().map(|x| e.eval(&[*x])).collect())
    };
    let r_f = ratio("f0_ratio", "1 + 0.5*sin(x)")?;
    let r_g = ratio("g0_ratio", "x")?;
    let p = cfg.f64_or("p", 2.0)?;
    let t_max = cfg.f64_or("t_max", 5.0)?;
    let samples = cfg.opt_usize("samples")?.unwrap_or(51).max(2);
    let times = linspace(0.0, t_max, samples);
    let rep = verify_generalized_fisher_decay_1d(&solver, &r_f, &r_g, p, &times, coarse.lambda1)?;

    writeln!(a1, "\ndecay check: p = {}, cells = {}, dt = {}", g17(p), opts.cells, g17(opts.dt)).unwrap();
    writeln!(a1, "max_mass_drift = {}", g17(rep.max_mass_drift)).unwrap();
    writeln!(a1, "min_ratio_f = {}", g17(rep.min_ratio_f)).unwrap();
    writeln!(a1, "near_vacuum_faces = {}", rep.near_vacuum_faces).unwrap();
    let worst = rep.records.iter().map(|r| r.margin()).fold(f64::INFINITY, f64::min);
    writeln!(a1, "worst_margin = {}", g17(worst)).unwrap();
    for w in &rep.warnings {
        writeln!(a1, "warning: {w}").unwrap();
    }
    writeln!(a1, "verdict = {}", if rep.passed() { "PASS" } else { "FAIL" }).unwrap();

    let mut csv = Csv::new(&["t", "fisher", "bound", "margin", "passed"]);
    for r in &rep.records {
        csv.row(&[g17(r.t), g17(r.lhs), g17(r.rhs), g17(r.margin()), (if r.passed { "1" } else { "0" }).into()]);
    }
    out.write("a1_report.txt", &a1)?;
    out.write("decay.csv", &csv.into_string())?;
    let svg = line_plot(
        "Generalized Fisher decay (1-D)",
        "t",
        "value",
        &[
            Series {
                name: "discrete I_p",
                color: "#1f77b4",
                points: rep.times.iter().copied().zip(rep.fisher.iter().copied()).collect(),
            },
            Series {
                name: "I_p(0) exp(-2 lambda1 t)",
                color: "#d62728",
                points: rep.times.iter().copied().zip(rep.bound.iter().copied()).collect(),
            },
        ],
        true,
    );
    out.write("decay.svg", &svg)?;
    entries.push(("cells".into(), opts.cells.to_string()));
    entries.push(("dt".into(), g17(opts.dt)));
    entries.push(("p".into(), g17(p)));
    out.write_manifest(&cfg.source, &entries)?;
    Ok(Outcome {
        code: if rep.passed() { EXIT_PASS } else { EXIT_CHECK_FAILED },
        text: a1,
    })
}
