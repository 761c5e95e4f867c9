//! `ionwave`: command-line front end for the traveling-wave toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] ionwave::Error),
    #[error("{0}")]
    MonitorViolation(String),
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(e) if e.is_non_convergence() => 2,
            CliError::Core(ionwave::Error::Singular(_)) => 2,
            CliError::Core(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::MonitorViolation(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ionwave", version, about = "Periodic ion-acoustic traveling waves: bifurcation, continuation and corner waves")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config field, e.g. `--set continuation.max_steps=3`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true, value_name = "PATH")]
    output_dir: Option<PathBuf>,
    #[arg(long = "grid-M", global = true, value_name = "N")]
    grid_m: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Admissibility report for the configured pressure law.
    CheckPressure,
    /// Continuum and grid-consistent bifurcation speeds.
    BifurcationPoint,
    /// φ = H⁻¹(f) for a field read from CSV (columns x, f).
    SolveElliptic {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
    /// Ψ''(0), the polynomial coefficients and the exceptional periods.
    Psi2 {
        /// `power:gamma=2,kappa=0.5`, `log:kappa=1`, `inverse:kappa=1`,
        /// `custom:terms=1@2;0.5@3,log_coef=0` or inline JSON.
        #[arg(long)]
        pressure: Option<String>,
        #[arg(long = "L")]
        period: Option<f64>,
    },
    /// Continue the branch from the local chart to touching.
    TraceBranch,
    /// Pinned corner wave seeded from a touched branch.
    LimitWave {
        /// Seed from a saved touched checkpoint instead of tracing.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Continue a checkpointed trace.
    Resume {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long)]
        max_steps: Option<usize>,
    },
}

impl Cli {
    fn overrides(&self) -> Vec<String> {
        let mut items = self.set.clone();
        if let Some(m) = self.grid_m {
            items.push(format!("grid_M={m}"));
        }
        if let Some(dir) = &self.output_dir {
            items.push(format!("output_dir={}", serde_json::Value::String(dir.display().to_string())));
        }
        items
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = cli.overrides();
    let load = || config::RunConfig::load(cli.config.as_deref(), &overrides);
    match &cli.command {
        Command::CheckPressure => commands::check_pressure(&load()?),
        Command::BifurcationPoint => commands::bifurcation_point(&load()?),
        Command::SolveElliptic { input } => commands::solve_elliptic(&load()?, input),
        Command::Psi2 { pressure, period } => commands::psi2(&load()?, pressure.as_deref(), *period),
        Command::TraceBranch => commands::trace_branch(&load()?),
        Command::LimitWave { checkpoint } => commands::limit_wave(&load()?, checkpoint.as_deref(), &overrides),
        Command::Resume { checkpoint, max_steps } => commands::resume(checkpoint, &overrides, *max_steps),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
