//! Run manifests and the table formats that embed them.
//!
//! CSV tables start with one comment line, `# ` followed by the manifest as
//! JSON; JSON outputs carry it under a top-level `manifest` key. Either form
//! is enough to rerun the command with `jamdet replay`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Detect,
    Fig1,
    Fig2,
    Analyze,
    Threshold,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Detect => "detect",
            CommandKind::Fig1 => "fig1",
            CommandKind::Fig2 => "fig2",
            CommandKind::Analyze => "analyze",
            CommandKind::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub version: String,
    pub seed: u64,
    /// Fully resolved configuration; defaults and overrides already applied.
    pub config: Config,
    /// Observation file read by `detect`, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: CommandKind, config: &Config) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.scenario.seed,
            config: config.clone(),
            observations: None,
            outputs: Vec::new(),
            duration_secs: 0.0,
        }
    }
}

pub const FIG1_HEADER: [&str; 14] = [
    "M_r", "K", "L", "tau", "q_dB", "target_pfa", "mu_prime", "pc_empirical", "pc_exact", "pc_asymp", "ci_low", "ci_high",
    "n_trials", "seed",
];

pub const FIG2_HEADER: [&str; 9] =
    ["target_pfa", "q_dB", "mu_prime", "pfa_empirical", "pc_empirical", "pc_exact", "pc_asymp", "n_trials", "seed"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_table(out: &mut dyn Write, manifest: &RunManifest, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(manifest)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV table as written by [`write_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub manifest: RunManifest,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest = manifest_from_text(text)?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers()?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { manifest, header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `name` of every row parsed as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name).ok_or_else(|| CliError::Input(format!("table has no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| r[c].parse::<f64>().map_err(|e| CliError::Input(format!("column `{name}`: `{}`: {e}", r[c]))))
            .collect()
    }
}

/// Reads the manifest from a CSV table or a JSON output.
pub fn manifest_from_text(text: &str) -> Result<RunManifest> {
    if let Some(rest) = text.strip_prefix("# ") {
        let line = rest.lines().next().unwrap_or_default();
        return Ok(serde_json::from_str(line)?);
    }
    #[derive(Deserialize)]
    struct Wrapped {
        manifest: RunManifest,
    }
    let wrapped: Wrapped = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("no run manifest found (expected a `# ` line or a JSON `manifest` key): {e}")))?;
    Ok(wrapped.manifest)
}
