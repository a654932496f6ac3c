//! Command-line runner: `idp-lab <simulate|verify|spectra|classify>`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::IdpError;
use config::{ConfigError, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_IDENTITY: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "idp-lab",
    version,
    about = "Stationary infinitely divisible processes via Poisson suspensions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trajectories and write them as CSV.
    Simulate(RunArgs),
    /// Check the Fock-space identities.
    Verify(RunArgs),
    /// Spectral coefficients and the covariance relation.
    Spectra(RunArgs),
    /// Ergodic classification reports.
    Classify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("identity check failed: {0}")]
    Identity(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn from_idp(context: &str, e: IdpError) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            IdpError::DepthExceeded { .. }
            | IdpError::ZeroHitMass
            | IdpError::SupportViolation { .. }
            | IdpError::SmallJumpBound { .. }
            | IdpError::InsufficientBudget(_) => CliError::Precondition(msg),
            _ => CliError::Config(msg),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Precondition(_) => EXIT_PRECONDITION,
            CliError::Identity(_) => EXIT_IDENTITY,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Runs one command; returns the written files on success.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let (args, name) = match &cli.command {
        Command::Simulate(a) => (a, "simulate"),
        Command::Verify(a) => (a, "verify"),
        Command::Spectra(a) => (a, "spectra"),
        Command::Classify(a) => (a, "classify"),
    };
    let cfg = ExperimentConfig::load(&args.config)?;
    let seed = cfg.seed(args.seed)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("idp-lab-out"));
    let outcome = match name {
        "simulate" => commands::simulate(&cfg, seed, &out)?,
        "verify" => commands::verify(&cfg, seed, &out)?,
        "spectra" => commands::spectra(&cfg, seed, &out)?,
        _ => commands::classify_cmd(&cfg, seed, &out)?,
    };
    if !outcome.failures.is_empty() {
        return Err(CliError::Identity(outcome.failures.join("; ")));
    }
    Ok(outcome.written.0)
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("idp-lab: {e}");
            e.exit_code()
        }
    }
}
