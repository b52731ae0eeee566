//! Run configuration: command-line flags merged over an optional JSON file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use almgren_core::WeightParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand. All optional so that a config file can
/// fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalFlags {
    /// Fractional order s in (1, 2).
    #[arg(long = "s", global = true)]
    pub s: Option<f64>,
    /// Spatial dimension N.
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Reference radius R.
    #[arg(long = "R", global = true)]
    pub r: Option<f64>,
    /// Grid resolution of the command's main solver.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output artifacts; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// JSON file with defaults for the flags above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub s: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    /// Default term list for synthesize, fit and almgren.
    pub terms: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: WeightParams,
    pub resolution: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub terms: Option<String>,
}

pub const DEFAULT_S: f64 = 1.5;
pub const DEFAULT_N: usize = 3;
pub const DEFAULT_R: f64 = 1.0;

impl RunConfig {
    pub fn resolve(flags: &GlobalFlags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let s = flags.s.or(file.s).unwrap_or(DEFAULT_S);
        let n = flags.n.or(file.n).unwrap_or(DEFAULT_N);
        let r = flags.r.or(file.r).unwrap_or(DEFAULT_R);
        let params = WeightParams::new(s, n, r)?;
        Ok(Self {
            params,
            resolution: flags.resolution.or(file.resolution),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags.out.clone().or(file.out),
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            terms: file.terms,
        })
    }
}
