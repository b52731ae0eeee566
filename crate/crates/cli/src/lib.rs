//! Command-line front end for the almgren-core kernels.
//!
//! `run` parses arguments, executes one subcommand and returns the process
//! exit status: 0 on success, 2 for usage or validation errors, 3 when a
//! numerical check reports a failure.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use almgren_core::LabError;

pub mod commands;
pub mod config;
pub mod output;

use commands::{AlmgrenArgs, ExtendArgs, FitArgs, InequalityArgs, ProfileArgs, SpectrumCommand, SynthesizeArgs};
use config::{GlobalFlags, RunConfig};

pub const SCHEMA: &str = "almgren-lab/1";
pub const THREADS_VAR: &str = "ALMGREN_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "almgren-lab", version, about = "Spectral, extension and frequency-function experiments for the weighted fourth-order system")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hemisphere or half-cylinder eigenvalues.
    #[command(subcommand)]
    Spectrum(SpectrumCommand),
    /// One-dimensional extension profile for b = 3 - 2s.
    Profile(ProfileArgs),
    /// Extension of a periodic field to the half space.
    Extend(ExtendArgs),
    /// Separable solution from a term list.
    Synthesize(SynthesizeArgs),
    /// Blow-up coefficient fit for each term of a synthesis.
    Fit(FitArgs),
    /// Frequency trace and vanishing-order limit.
    Almgren(AlmgrenArgs),
    /// Hardy, Hardy-Rellich and trace Sobolev checks on a seeded family.
    CheckInequalities(InequalityArgs),
    /// Fast invariant suite across all modules.
    Selftest,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Lab(LabError),
    /// A check ran to completion and failed.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Check(_) => 3,
            CliError::Lab(e) => match e {
                LabError::Domain(_)
                | LabError::Input(_)
                | LabError::UnsupportedDimension(_)
                | LabError::Refinement { .. }
                | LabError::Regime(_) => 2,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Lab(e) => write!(f, "{e}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one invocation and returns its exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("almgren-lab: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = RunConfig::resolve(&cli.global)?;
    let out = match &cli.command {
        Command::Spectrum(c) => commands::spectrum(&cfg, c)?,
        Command::Profile(a) => commands::profile(&cfg, a)?,
        Command::Extend(a) => commands::extend(&cfg, a)?,
        Command::Synthesize(a) => commands::synthesize(&cfg, a)?,
        Command::Fit(a) => commands::fit(&cfg, a)?,
        Command::Almgren(a) => commands::almgren(&cfg, a)?,
        Command::CheckInequalities(a) => commands::check_inequalities(&cfg, a)?,
        Command::Selftest => commands::selftest(&cfg)?,
    };
    output::emit(&cfg, &out.artifacts)?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
