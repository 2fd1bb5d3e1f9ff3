//! `telegraph`: reproducible runs of the velocity-switching process studies.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 config error, 3 domain or grid error,
//! 4 moving-frame coverage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use telegraph_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "telegraph",
    version,
    about = "Velocity-switching process: Monte Carlo, PDE, moments, boosts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo ensemble: position histogram, atoms and moments.
    Simulate(SimulateArgs),
    /// Forward Chapman-Kolmogorov solve with snapshots and diagnostics.
    Solve(SolveArgs),
    /// Covariance residual of the boosted system over a refinement ladder.
    Covariance(CovarianceArgs),
    /// Path-averaged density of a wave packet under random evolution.
    Quantum(QuantumArgs),
    /// L1 distance to the diffusion limit over a ladder of rates.
    Limit(LimitArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartArg {
    Plus,
    Minus,
    Symmetric,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Speed.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub v: f64,
    /// Switching rate.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Light speed (relativistic studies; defaults to 1 there).
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    /// Number of cells.
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, value_enum, default_value_t = StartArg::Plus)]
    pub start: StartArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialArg {
    Point,
    Gaussian,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, value_enum, default_value_t = StartArg::Plus)]
    pub start: StartArg,
    #[arg(long, value_enum, default_value_t = InitialArg::Point)]
    pub initial: InitialArg,
    /// Width of the Gaussian initial data.
    #[arg(long, default_value_t = 0.1)]
    pub width: f64,
    /// Number of evenly spaced snapshots written.
    #[arg(long, default_value_t = 11)]
    pub snapshots: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CovarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Frame velocity.
    #[arg(long = "V", allow_hyphen_values = true)]
    pub frame_velocity: f64,
    /// Refinement levels (each halves dx).
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Width of the Gaussian initial data.
    #[arg(long, default_value_t = 0.5)]
    pub width: f64,
    /// Half extent of the moving-frame window in t'.
    #[arg(long, default_value_t = 0.3)]
    pub half_t: f64,
    /// Half extent of the moving-frame window in x'.
    #[arg(long, default_value_t = 1.0)]
    pub half_x: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketArg {
    Uniform,
    Gaussian,
    Cosine,
}

#[derive(Args, Debug, Serialize)]
pub struct QuantumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = PacketArg::Uniform)]
    pub packet: PacketArg,
    /// Support of the packet (centre ± half width for `cosine`).
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub b: f64,
    /// Width of the Gaussian packet before truncation.
    #[arg(long, default_value_t = 0.05)]
    pub width: f64,
    /// Density method: mc, pde or analytic.
    #[arg(long, default_value = "mc")]
    pub method: String,
    #[arg(long, allow_hyphen_values = true)]
    pub probe_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub probe_hi: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct LimitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Diffusivity v²/λ held fixed along the ladder.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 100.0, 1000.0])]
    pub lambdas: Vec<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::DomainNotCovered { .. } => 4,
            e if e.is_domain_error() => 3,
            _ => 2,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 1;
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Covariance(a) => commands::covariance(a),
        Command::Quantum(a) => commands::quantum(a),
        Command::Limit(a) => commands::limit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
