use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "jamdet", version, about = "GLRT jamming detection on unused pilots in massive MIMO uplinks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Paper,
    Consistent,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config with sections system, detector, scenario, sweep, analysis.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per run.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Exact formula variant for thresholds and closed-form columns.
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Config override `section.key=value`; repeatable, later wins.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

impl CommonArgs {
    /// `--set` values followed by the dedicated flags, in increasing precedence.
    pub fn overrides(&self) -> Vec<String> {
        let mut all = self.set.clone();
        if let Some(seed) = self.seed {
            all.push(format!("scenario.seed={seed}"));
        }
        if let Some(trials) = self.trials {
            all.push(format!("scenario.trials={trials}"));
        }
        if let Some(v) = self.variant {
            let name = match v {
                VariantArg::Paper => "paper",
                VariantArg::Consistent => "consistent",
            };
            all.push(format!("detector.variant=\"{name}\""));
        }
        all
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trial (or read observations) and decide; exit 0 clean, 2 detected.
    Detect {
        /// JSON observations `{"blocks": [{"re": [[..]], "im": [[..]]}]}` instead of a simulated trial.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Correct detection versus BS antennas, as CSV.
    Fig1,
    /// Correct detection versus false alarm for several jammer powers, as CSV.
    Fig2,
    /// Closed-form probabilities for both formula variants, as JSON.
    Analyze,
    /// Thresholds for a false-alarm target, as JSON.
    Threshold,
    /// Rerun the command recorded in an output's manifest.
    Replay { file: PathBuf },
}
