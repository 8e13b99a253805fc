//! Scenario configuration files.
//!
//! A config is a TOML document with the sections `system`, `detector`,
//! `scenario`, `sweep` and `analysis`. Every key is optional and unknown keys
//! are rejected. Values are layered: built-in defaults, then the file, then
//! `--set section.key=value` overrides and dedicated flags.
//!
//! Powers are in dB relative to the unit noise variance when given as plain
//! numbers; a string with a `lin` suffix (`"0.02 lin"`) gives a linear value,
//! and `"-17 dB"` is accepted as well.

use std::fmt;
use std::path::Path;

use jamdet::analysis::{FormulaVariant, ThresholdInversion};
use jamdet::detector::DetectorConfig;
use jamdet::model::{db_to_linear, SystemConfig};
use jamdet::montecarlo::{JammerMode, PilotMode, Scenario, SimulationMode};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

/// Antenna counts swept by `fig1` unless configured otherwise.
pub const DEFAULT_ANTENNA_GRID: [usize; 8] = [10, 20, 50, 100, 200, 300, 400, 500];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Power {
    Db(f64),
    Linear(f64),
}

impl Power {
    pub fn linear(self) -> f64 {
        match self {
            Power::Db(db) => db_to_linear(db),
            Power::Linear(v) => v,
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (num, ctor): (&str, fn(f64) -> Power) = if let Some(v) = s.strip_suffix("lin") {
            (v, Power::Linear)
        } else if let Some(v) = s.strip_suffix("dB") {
            (v, Power::Db)
        } else {
            return Err(format!("power `{s}` needs a `dB` or `lin` suffix, or a plain number in dB"));
        };
        num.trim().parse::<f64>().map(ctor).map_err(|e| format!("power `{s}`: {e}"))
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Power::Db(v) => write!(f, "{v} dB"),
            Power::Linear(v) => write!(f, "{v} lin"),
        }
    }
}

impl Serialize for Power {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Power::Db(v) => s.serialize_f64(*v),
            Power::Linear(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Power {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Power::Db(v)),
            Raw::Text(s) => Power::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Large-scale fading of the users: one value for all, or one per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fading {
    Common(f64),
    PerUser(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub bs_antennas: usize,
    pub jammer_antennas: usize,
    pub users: usize,
    pub pilot_len: usize,
    pub blocks: usize,
    pub coherence_len: usize,
    pub user_power: Power,
    pub jammer_power: Power,
    pub user_fading: Fading,
    pub jammer_fading: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            bs_antennas: 100,
            jammer_antennas: 4,
            users: 8,
            pilot_len: 10,
            blocks: 10,
            coherence_len: 200,
            user_power: Power::Db(0.0),
            jammer_power: Power::Db(-17.0),
            user_fading: Fading::Common(1.0),
            jammer_fading: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionKind {
    #[default]
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    /// Threshold on the clipped estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_prime: Option<f64>,
    /// False-alarm target; used when no other threshold is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_pfa: Option<f64>,
    /// Likelihood-ratio threshold, at least 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub inversion: InversionKind,
    pub variant: FormulaVariant,
}

pub const DEFAULT_TARGET_PFA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub jammer_present: bool,
    pub trials: u64,
    pub seed: u64,
    /// Trial index used by `detect`.
    pub trial: u64,
    pub simulation: SimulationMode,
    pub jammer_mode: JammerMode,
    pub pilots: PilotMode,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            jammer_present: false,
            trials: 100_000,
            seed: 1,
            trial: 0,
            simulation: SimulationMode::default(),
            jammer_mode: JammerMode::default(),
            pilots: PilotMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub bs_antennas: Vec<usize>,
    /// `(K, L)` pairs for `fig1`.
    pub users_blocks: Vec<[usize; 2]>,
    pub target_pfa: f64,
    pub pfa_grid: Vec<f64>,
    pub q_db: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            bs_antennas: DEFAULT_ANTENNA_GRID.to_vec(),
            users_blocks: vec![[6, 1], [4, 1], [6, 10], [4, 10]],
            target_pfa: DEFAULT_TARGET_PFA,
            pfa_grid: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            q_db: vec![-23.0, -20.0, -17.0, -14.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_prime: Option<f64>,
    /// Overrides `q M_w beta_w` from the system section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_data_power: Option<Power>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jammer_data_power: Option<Power>,
    /// Per-pilot jamming weights; equal split when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub system: SystemSection,
    pub detector: DetectorSection,
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
    pub analysis: AnalysisSection,
}

fn config_error(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses one `key.path=value` override into `table`.
///
/// The value is read as a TOML value when it parses as one and as a bare
/// string otherwise, so `system.jammer_power=-20` and `system.jammer_power=0.01 lin`
/// both work.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| config_error(format!("override `{spec}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_error(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed a single key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut node = table;
    for part in parents {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{key}`: `{part}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl Config {
    /// Defaults, then `file_text`, then `overrides` in order.
    pub fn layered(file_text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table = match file_text {
            Some(text) => {
                // Checked on its own first so errors point at the file's own lines.
                toml::from_str::<Config>(text).map_err(config_error)?;
                toml::from_str::<toml::Table>(text).map_err(config_error)?
            }
            None => toml::Table::new(),
        };
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        // Round-trip through text so type errors carry the offending key.
        let text = toml::to_string(&table).map_err(config_error)?;
        let config: Config = toml::from_str(&text).map_err(config_error)?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.into(), source })?),
            None => None,
        };
        Self::layered(text.as_deref(), overrides)
    }

    fn check(&self) -> Result<()> {
        let d = &self.detector;
        let set = [d.mu_prime.is_some(), d.target_pfa.is_some(), d.mu.is_some()].iter().filter(|b| **b).count();
        if set > 1 {
            return Err(config_error("detector: set at most one of mu_prime, target_pfa, mu"));
        }
        if self.scenario.trials == 0 {
            return Err(config_error("scenario.trials must be at least 1"));
        }
        Ok(())
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let s = &self.system;
        let user_fading = match &s.user_fading {
            Fading::Common(b) => vec![*b; s.users],
            Fading::PerUser(v) => v.clone(),
        };
        let cfg = SystemConfig {
            bs_antennas: s.bs_antennas,
            jammer_antennas: s.jammer_antennas,
            users: s.users,
            pilot_len: s.pilot_len,
            blocks: s.blocks,
            user_power: s.user_power.linear(),
            jammer_power: s.jammer_power.linear(),
            user_fading,
            jammer_fading: s.jammer_fading,
            coherence_len: s.coherence_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn inversion(&self) -> ThresholdInversion {
        match self.detector.inversion {
            InversionKind::Exact => ThresholdInversion::Exact(self.detector.variant),
            InversionKind::Asymptotic => ThresholdInversion::Asymptotic,
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        let d = &self.detector;
        match (d.mu_prime, d.mu, d.target_pfa) {
            (Some(v), _, _) => DetectorConfig::mu_prime(v),
            (None, Some(mu), _) => DetectorConfig::mu_log(mu),
            (None, None, target) => DetectorConfig::target_pfa(target.unwrap_or(DEFAULT_TARGET_PFA), self.inversion()),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let sc = &self.scenario;
        let scenario = Scenario {
            simulation: sc.simulation,
            jammer_mode: sc.jammer_mode,
            pilots: sc.pilots,
            ..Scenario::new(self.system_config()?, self.detector_config(), sc.jammer_present, sc.trials, sc.seed)
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
