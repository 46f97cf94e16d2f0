//! Command-line front end for the toolkit: chained JSON artifacts for the
//! construction stages, CSV paths and spectra for the simulators, and the
//! full verification table.
//!
//! Exit codes: 0 on success, 1 for I/O problems, 2 for domain-invalid input,
//! 3 when a computed artifact fails its own verification.

mod fsio;
mod runs;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irrev::rng;

pub enum Failure {
    Io(String),
    Domain(String),
    Verification(String),
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Verification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Domain(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<irrev::Error> for Failure {
    fn from(e: irrev::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

/// The seed for a run: `--seed` wins, then the `IRREV_SEED` environment
/// variable, then the toolkit default.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("IRREV_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            Failure::Domain(format!(
                "IRREV_SEED must be an unsigned 64-bit integer, got {text:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(rng::DEFAULT_SEED),
        Err(e) => Err(Failure::Domain(format!("IRREV_SEED: {e}"))),
    }
}

/// Stationary processes with rational spectra: spectral factorization,
/// forward/backward realizations, the structural inner function, lossless
/// network extraction, seeded simulation, and statistical verification.
#[derive(Parser)]
#[command(name = "irrev", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a rational spectral density into analytic and coanalytic halves.
    Factorize(StageArgs),
    /// Build the minimal forward model from a factorization.
    Realize(StageArgs),
    /// Attach the stationary covariance and the backward model.
    Backward(StageArgs),
    /// Extract the structural inner function linking the two realizations.
    Structural(StageArgs),
    /// Map the structural function to its lossless impedance and load model.
    Lossless(StageArgs),
    /// Expand the lossless impedance into its Foster partial fractions.
    Foster(StageArgs),
    /// Run the whole construction chain from a density file in one call.
    Pipeline(StageArgs),
    /// Sample one stationary forward trajectory to CSV.
    Simulate(SimulateArgs),
    /// Drive the lossless load through the scattering junction and compare
    /// the measured spectrum with the closed-loop prediction.
    Bathsim(BathsimArgs),
    /// Welch spectral estimate of a recorded path.
    Estimate(EstimateArgs),
    /// Run every toolkit guarantee and print the pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct StageArgs {
    /// Input file: a density for factorize and pipeline, otherwise the
    /// artifact written by the previous stage.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving the artifacts and the manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Number of axis points in the verification grids.
    #[arg(long, default_value_t = 1024)]
    grid_points: usize,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Forward/backward pair artifact.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Sample spacing.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Number of recorded samples.
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    /// RNG seed; falls back to IRREV_SEED, then to the built-in default.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct BathsimArgs {
    /// Lossless-stage artifact holding the load model.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Sample spacing.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Number of recorded samples.
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    /// Inverse temperature of the incident wave stream.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// RNG seed; falls back to IRREV_SEED, then to the built-in default.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Path CSV written by simulate or bathsim.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Analytic density file; when given, the estimation error is reported.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Smaller ensembles and shorter runs for a fast sweep.
    #[arg(long)]
    quick: bool,
    /// RNG seed; falls back to IRREV_SEED, then to the built-in default.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Factorize(args) => stages::cmd_factorize(&args),
        Command::Realize(args) => stages::cmd_realize(&args),
        Command::Backward(args) => stages::cmd_backward(&args),
        Command::Structural(args) => stages::cmd_structural(&args),
        Command::Lossless(args) => stages::cmd_lossless(&args),
        Command::Foster(args) => stages::cmd_foster(&args),
        Command::Pipeline(args) => stages::cmd_pipeline(&args),
        Command::Simulate(args) => runs::cmd_simulate(&args),
        Command::Bathsim(args) => runs::cmd_bathsim(&args),
        Command::Estimate(args) => runs::cmd_estimate(&args),
        Command::Verify(args) => runs::cmd_verify(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
