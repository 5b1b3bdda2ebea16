//! `hypodecay` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Overrides;
use error::CliError;

#[derive(Parser)]
#[command(name = "hypodecay", version, about = "Decay experiments for linear Fokker-Planck equations", after_help = config::KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or a bundled name: identity_2d, defective_2d, appendix_a
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides `out`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gauss-Hermite points per axis, overrides `grid_degree`
    #[arg(long)]
    grid_degree: Option<usize>,
    /// Certificate parameter, overrides `P`
    #[arg(long)]
    nu: Option<f64>,
    /// Accepted for reproducibility scripts; all computations are deterministic
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions and print the normalized system
    Validate(Common),
    /// Build a weight matrix P for the normalized drift
    Certify(Common),
    /// Evolve the initial data and record the functionals
    Simulate(Common),
    /// Run the enabled checks along a trajectory
    Verify(Common),
    /// Scalar-diffusion example with a non-quadratic potential
    AppendixA(Common),
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    let (common, which) = match &cli.command {
        Command::Validate(c) => (c, 0),
        Command::Certify(c) => (c, 1),
        Command::Simulate(c) => (c, 2),
        Command::Verify(c) => (c, 3),
        Command::AppendixA(c) => (c, 4),
    };
    let cfg = commands::load_config(&common.config)?;
    let ov = Overrides {
        grid_degree: common.grid_degree,
        nu: common.nu,
        out: common.out.clone(),
        seedless: common.seedless,
    };
    match which {
        0 => commands::cmd_validate(&cfg),
        1 => commands::cmd_certify(&cfg, &ov),
        2 => commands::cmd_simulate(&cfg, &ov),
        3 => commands::cmd_verify(&cfg, &ov),
        _ => commands::cmd_appendix_a(&cfg, &ov),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
