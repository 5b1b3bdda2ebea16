//! `key = value` scenario files.

use std::collections::BTreeMap;

use hypodecay_core::propagator::{DensityState, GaussianComponent, GaussianMixture, HermiteExpansion};
use nalgebra::{DMatrix, DVector};

use crate::error::CliError;

/// Documented keys with their defaults, shown by `--help`.
pub const KEYS_HELP: &str = "\
Scenario file: one `key = value` per line, `#` starts a comment.

System
  dim          dimension d (required for every subcommand except appendix-a, default 1 there)
  D, C         d x d matrices, rows separated by ';', entries by spaces or commas
  tolerance    numerical tolerance of the structural checks [1e-9]

Initial data (simulate, verify)
  f0           `mixture: w, m_1..m_d, upper-triangular covariance; ...`,
               `hermite: a_1 .. a_d coeff; ...` (coefficients of He_a f_inf in
               normalized coordinates) or `equilibrium`          [required]
  g0           same forms, signed weights allowed                 [= f0]
  frame        coordinates of mixture data: original | normalized [original]

Functional and time grid
  p            entropy exponent in [1, 2]                         [2]
  P            identity | certificate(nu)                         [identity]
  t_max        final time                                         [15/mu]
  samples      number of sample times                             [120]
  grid_degree  Gauss-Hermite points per axis                      [dimension default]
  eta, eps     lower-bound parameters                             [0.5, 0.25]
  checks       comma list or `all`: entropy_monotone, log_sobolev, splitting,
               fisher_decay, improved_decay, interpolation, contractivity,
               lower_bound, main_theorem       [all except improved_decay]
  out          output directory                                   [out]

Non-quadratic potential, d = 1 (appendix-a)
  phi          potential expression in x (y, z for d = 2, 3)      [required]
  diffusion    positive scalar diffusion expression               [required]
  f0_ratio     f0/f_inf before normalization                      [1 + 0.5*sin(x)]
  g0_ratio     g0/f_inf                                           [x]
  cells        finite-volume cells                                [2048]
  dt           largest time step                                  [1e-3]
  a1_points    rate-scan points per axis                          [dimension default]
";

const KNOWN: &[&str] = &[
    "dim", "D", "C", "tolerance", "f0", "g0", "frame", "p", "P", "t_max", "samples",
    "grid_degree", "eta", "eps", "checks", "out", "phi", "diffusion", "f0_ratio", "g0_ratio",
    "cells", "dt", "a1_points",
];

pub const ALL_CHECKS: &[&str] = &[
    "entropy_monotone",
    "log_sobolev",
    "splitting",
    "fisher_decay",
    "improved_decay",
    "interpolation",
    "contractivity",
    "lower_bound",
    "main_theorem",
];

#[derive(Debug, Clone, PartialEq)]
pub enum WeightMode {
    Identity,
    Certificate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Original,
    Normalized,
}

/// Initial datum as written in the file, resolved against a system later.
#[derive(Debug, Clone)]
pub enum InitialSpec {
    Equilibrium,
    Mixture(Vec<(f64, DVector<f64>, DMatrix<f64>)>),
    Hermite(Vec<(Vec<u32>, f64)>),
}

impl InitialSpec {
    /// Builds the normalized-frame state; mixture data in original
    /// coordinates is mapped through `t`.
    pub fn resolve(&self, dim: usize, frame: Frame, t: &DMatrix<f64>) -> Result<DensityState, CliError> {
        Ok(match self {
            InitialSpec::Equilibrium => DensityState::Mixture(GaussianMixture::standard(dim)),
            InitialSpec::Mixture(parts) => {
                let mut comps = Vec::new();
                for (w, m, s) in parts {
                    let (m, s) = match frame {
                        Frame::Normalized => (m.clone(), s.clone()),
                        Frame::Original => (t * m, t * s * t.transpose()),
                    };
                    let s = (&s + s.transpose()) * 0.5;
                    comps.push(GaussianComponent::new(*w, m, s)?);
                }
                DensityState::Mixture(GaussianMixture::new(comps)?)
            }
            InitialSpec::Hermite(terms) => {
                let degree = terms
                    .iter()
                    .map(|(a, _)| a.iter().sum::<u32>() as usize)
                    .max()
                    .unwrap_or(0);
                DensityState::Hermite(HermiteExpansion::from_unnormalized(dim, degree, terms)?)
            }
        })
    }
}

/// Raw `key -> (line, value)` map with typed accessors.
#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
    pub source: String,
}

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: message.into(),
    }
}

impl Config {
    pub fn parse(source: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in source.lines().enumerate() {
            let line = i + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got {text:?}")))?;
            let key = key.trim();
            if !KNOWN.contains(&key) {
                return Err(err(line, format!("unknown key {key:?}")));
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(err(line, format!("duplicate key {key:?} (first on line {first})")));
            }
            entries.insert(key.to_string(), (line, value.trim().to_string()));
        }
        Ok(Config {
            entries,
            source: source.to_string(),
        })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(0, |r| r.0)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn require(&self, key: &str) -> Result<(usize, &str), CliError> {
        self.raw(key).ok_or_else(|| err(0, format!("missing required key {key:?}")))
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(|(_, v)| v.to_string())
    }

    pub fn required_string(&self, key: &str) -> Result<(usize, String), CliError> {
        self.require(key).map(|(l, v)| (l, v.to_string()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => parse_f64(v).map_err(|m| err(line, format!("{key}: {m}"))),
        }
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<usize>()
                    .map_err(|_| err(line, format!("{key}: expected a non-negative integer, got {v:?}")))
            })
            .transpose()
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        let (line, _) = self.require("dim")?;
        let d = self.opt_usize("dim")?.unwrap_or(0);
        if d == 0 {
            return Err(err(line, "dim must be >= 1"));
        }
        Ok(d)
    }

    pub fn matrix(&self, key: &str, dim: usize) -> Result<DMatrix<f64>, CliError> {
        let (line, v) = self.require(key)?;
        let rows: Vec<&str> = v.split(';').map(str::trim).filter(|r| !r.is_empty()).collect();
        if rows.len() != dim {
            return Err(err(line, format!("{key}: expected {dim} rows, got {}", rows.len())));
        }
        let mut m = DMatrix::zeros(dim, dim);
        for (i, row) in rows.iter().enumerate() {
            let vals = parse_list(row).map_err(|e| err(line, format!("{key} row {}: {e}", i + 1)))?;
            if vals.len() != dim {
                return Err(err(
                    line,
                    format!("{key} row {}: expected {dim} entries, got {}", i + 1, vals.len()),
                ));
            }
            for (j, x) in vals.into_iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn initial(&self, key: &str, dim: usize) -> Result<Option<InitialSpec>, CliError> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        parse_initial(v, dim).map(Some).map_err(|m| err(line, format!("{key}: {m}")))
    }

    pub fn frame(&self) -> Result<Frame, CliError> {
        match self.raw("frame") {
            None => Ok(Frame::Original),
            Some((_, "original")) => Ok(Frame::Original),
            Some((_, "normalized")) => Ok(Frame::Normalized),
            Some((line, v)) => Err(err(line, format!("frame must be original or normalized, got {v:?}"))),
        }
    }

    pub fn weight_mode(&self) -> Result<WeightMode, CliError> {
        let Some((line, v)) = self.raw("P") else {
            return Ok(WeightMode::Identity);
        };
        if v == "identity" {
            return Ok(WeightMode::Identity);
        }
        v.strip_prefix("certificate(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|nu| parse_f64(nu.trim()).ok())
            .map(WeightMode::Certificate)
            .ok_or_else(|| err(line, format!("P must be identity or certificate(nu), got {v:?}")))
    }

    pub fn checks(&self) -> Result<Vec<String>, CliError> {
        let Some((line, v)) = self.raw("checks") else {
            return Ok(ALL_CHECKS
                .iter()
                .filter(|c| **c != "improved_decay")
                .map(|c| c.to_string())
                .collect());
        };
        if v == "all" {
            return Ok(ALL_CHECKS.iter().map(|c| c.to_string()).collect());
        }
        let mut out = Vec::new();
        for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if !ALL_CHECKS.contains(&name) {
                return Err(err(line, format!("unknown check {name:?}")));
            }
            out.push(name.to_string());
        }
        Ok(out)
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("expected a number, got {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got {s:?}"))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_f64)
        .collect()
}

fn parse_initial(v: &str, dim: usize) -> Result<InitialSpec, String> {
    if v == "equilibrium" {
        return Ok(InitialSpec::Equilibrium);
    }
    let (kind, body) = v
        .split_once(':')
        .ok_or_else(|| "expected `mixture: ...`, `hermite: ...` or `equilibrium`".to_string())?;
    let items = body.split(';').map(str::trim).filter(|s| !s.is_empty());
    match kind.trim() {
        "mixture" => {
            let ntri = dim * (dim + 1) / 2;
            let mut parts = Vec::new();
            for (k, item) in items.enumerate() {
                let vals = parse_list(item)?;
                if vals.len() != 1 + dim + ntri {
                    return Err(format!(
                        "component {} has {} numbers, expected {} (weight, {dim} means, {ntri} covariance entries)",
                        k + 1,
                        vals.len(),
                        1 + dim + ntri
                    ));
                }
                let mean = DVector::from_column_slice(&vals[1..1 + dim]);
                let mut cov = DMatrix::zeros(dim, dim);
                let mut idx = 1 + dim;
                for i in 0..dim {
                    for j in i..dim {
                        cov[(i, j)] = vals[idx];
                        cov[(j, i)] = vals[idx];
                        idx += 1;
                    }
                }
                parts.push((vals[0], mean, cov));
            }
            if parts.is_empty() {
                return Err("mixture has no components".into());
            }
            Ok(InitialSpec::Mixture(parts))
        }
        "hermite" => {
            let mut terms = Vec::new();
            for (k, item) in items.enumerate() {
                let toks: Vec<&str> = item.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
                if toks.len() != dim + 1 {
                    return Err(format!("term {} needs {dim} indices and a coefficient", k + 1));
                }
                let alpha = toks[..dim]
                    .iter()
                    .map(|t| t.parse::<u32>().map_err(|_| format!("bad multi-index entry {t:?}")))
                    .collect::<Result<Vec<_>, _>>()?;
                terms.push((alpha, parse_f64(toks[dim])?));
            }
            if terms.is_empty() {
                return Err("hermite expansion has no terms".into());
            }
            Ok(InitialSpec::Hermite(terms))
        }
        other => Err(format!("unknown initial-data kind {other:?}")),
    }
}
