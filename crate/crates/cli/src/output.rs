//! Artifact serialization: JSON documents and CSV tables.

use std::io::Write;

use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::CliError;

#[derive(Debug, Clone)]
pub enum Body {
    Json(Value),
    Csv { header: Vec<String>, rows: Vec<Vec<String>> },
}

#[derive(Debug, Clone)]
pub struct Artifact {
    /// File stem used under `--out`.
    pub name: String,
    pub body: Body,
}

impl Artifact {
    pub fn json(name: &str, value: Value) -> Self {
        Self { name: name.into(), body: Body::Json(value) }
    }

    pub fn csv(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Self { name: name.into(), body: Body::Csv { header: header.iter().map(|s| s.to_string()).collect(), rows } }
    }

    fn format(&self) -> Format {
        match self.body {
            Body::Json(_) => Format::Json,
            Body::Csv { .. } => Format::Csv,
        }
    }

    fn extension(&self) -> &'static str {
        match self.body {
            Body::Json(_) => "json",
            Body::Csv { .. } => "csv",
        }
    }

    pub fn render(&self) -> Result<String, CliError> {
        match &self.body {
            Body::Json(v) => {
                let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            Body::Csv { header, rows } => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
                for r in rows {
                    w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

/// 17 significant digits with a radix point.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// With `--out`, writes every artifact into the directory. Otherwise prints
/// the first artifact in the requested format, or the first one if none match.
pub fn emit(cfg: &RunConfig, artifacts: &[Artifact]) -> Result<(), CliError> {
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for a in artifacts {
            let path = dir.join(format!("{}.{}", a.name, a.extension()));
            std::fs::write(&path, a.render()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        return Ok(());
    }
    let Some(pick) = artifacts.iter().find(|a| a.format() == cfg.format).or(artifacts.first()) else {
        return Ok(());
    };
    let text = pick.render()?;
    std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}
