//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 Newton
//! convergence failure, 4 missing fit file, 5 combination matrix does not
//! match the fit, 6 the MCMC oracle did not converge, 7 benchmark gate
//! failed.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{run, CommandOutcome};
pub use manifest::{RunManifest, MANIFEST_FILE};

use crate::error::Error;
use crate::sgc::CorrectionKind;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_MISSING_FIT: u8 = 4;
pub const EXIT_DIMENSION: u8 = 5;
pub const EXIT_ORACLE: u8 = 6;
pub const EXIT_BENCH: u8 = 7;

/// Fit file name inside a `fit` output directory.
pub const FIT_FILE: &str = "fit.sgcfit";

#[derive(Debug, Parser)]
#[command(name = "sgc", version, about = "Skew Gaussian copula approximations for latent Gaussian models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write the fit file.
    Fit(FitArgs),
    /// Draw from the joint posterior approximation.
    Sample(SampleArgs),
    /// Posterior of linear combinations of the latent field.
    Lincomb(LincombArgs),
    /// Compare mean- and skew-corrected marginals with an MCMC run.
    CompareMcmc(CompareArgs),
    /// Time direct against table-based skew-normal functions.
    BenchQuantile(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    None,
    Mean,
    Skew,
}

impl From<KindArg> for CorrectionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::None => CorrectionKind::None,
            KindArg::Mean => CorrectionKind::Mean,
            KindArg::Skew => CorrectionKind::Skew,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LincombMode {
    Deterministic,
    Sampling,
    Both,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Model configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Recorded in the manifest; fitting is deterministic.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Fit file, or a `fit` output directory.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Skew)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the draws in the binary sample format.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct LincombArgs {
    /// Fit file, or a `fit` output directory.
    #[arg(long, conflicts_with = "summary", required_unless_present = "summary")]
    pub fit: Option<PathBuf>,
    /// Joint summary JSON used instead of a fit (deterministic mode only).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Combination matrix CSV.
    #[arg(long)]
    pub a_matrix: PathBuf,
    #[arg(long, value_enum, default_value_t = LincombMode::Deterministic)]
    pub mode: LincombMode,
    #[arg(long, value_enum, default_value_t = KindArg::Skew)]
    pub kind: KindArg,
    /// Draws for the sampling path.
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1_010_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thinning: usize,
    /// Largest accepted split-R̂.
    #[arg(long, default_value_t = 1.05)]
    pub rhat_max: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Fit file, or a `fit` output directory.
    #[arg(long)]
    pub fit: PathBuf,
    /// Latent names or 0-based indices; all components when omitted.
    #[arg(long, value_delimiter = ',')]
    pub components: Vec<String>,
    /// Draws per correction kind.
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub points: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidSpec(_) => EXIT_CONFIG,
            Error::NoConvergence { .. } | Error::ModeSearchFailure(_) => EXIT_CONVERGENCE,
            Error::DimensionMismatch { .. } | Error::UnknownComponent(_) => EXIT_DIMENSION,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

/// Entry point of the `sgc` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
