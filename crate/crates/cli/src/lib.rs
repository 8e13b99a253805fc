//! Command-line front end for the `jamdet` jamming detector.
//!
//! Commands read a layered TOML config (see [`config`]), run the detector,
//! sweeps or closed forms, and write CSV or JSON with an embedded
//! [`manifest::RunManifest`] so every output can be replayed.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use error::{CliError, Result};

use std::io::Write;

use args::{Cli, Command};
use commands::Outcome;
use config::Config;
use manifest::CommandKind;

/// Runs a parsed command line, writing primary output to `stdout` unless `--out` is set.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<Outcome> {
    if let Some(n) = cli.common.threads {
        jamdet::montecarlo::init_global_workers(n)?;
    }
    let out = cli.common.out.as_deref();
    let (kind, observations) = match &cli.command {
        Command::Replay { file } => return commands::replay(file, stdout, out),
        Command::Detect { observations } => (CommandKind::Detect, observations.as_deref()),
        Command::Fig1 => (CommandKind::Fig1, None),
        Command::Fig2 => (CommandKind::Fig2, None),
        Command::Analyze => (CommandKind::Analyze, None),
        Command::Threshold => (CommandKind::Threshold, None),
    };
    let config = Config::load(cli.common.config.as_deref(), &cli.common.overrides())?;
    commands::execute(kind, &config, observations, stdout, out)
}
