use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use jamdet::analysis::{
    self, asymptotic_spectral_efficiency, FormulaVariant, PerformancePoint, SpectralEfficiency, SpectralEfficiencyParams,
    ThresholdChoice, ThresholdInversion,
};
use jamdet::detector::{detect, DetectionReport};
use jamdet::model::{CMatrix, UnusedPilotObservations};
use jamdet::montecarlo::{check_roc_grid, run_trial, sweep_antennas, sweep_roc, AntennaRow, RocRow};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{Config, DEFAULT_TARGET_PFA};
use crate::error::{CliError, Result};
use crate::manifest::{fmt_f64, manifest_from_text, write_table, CommandKind, RunManifest, FIG1_HEADER, FIG2_HEADER};

/// How a successful run ended; `detect` distinguishes its two decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Clean,
    Detected,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done | Outcome::Clean => 0,
            Outcome::Detected => 2,
        }
    }
}

/// Where a command writes its main output.
pub enum Sink<'a> {
    Stdout(&'a mut dyn Write),
    File(PathBuf),
}

impl Sink<'_> {
    fn label(&self) -> String {
        match self {
            Sink::Stdout(_) => "-".into(),
            Sink::File(p) => p.display().to_string(),
        }
    }

    fn write_with(&mut self, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match self {
            Sink::Stdout(w) => f(*w),
            Sink::File(path) => {
                let file = File::create(&*path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                let mut w = BufWriter::new(file);
                f(&mut w)?;
                w.flush().map_err(|source| CliError::Io { path: path.clone(), source })
            }
        }
    }
}

fn finish(manifest: &mut RunManifest, sink: &Sink<'_>, started: Instant) {
    manifest.outputs = vec![sink.label()];
    manifest.duration_secs = started.elapsed().as_secs_f64();
}

pub fn fig1_rows(config: &Config) -> Result<Vec<AntennaRow>> {
    let mut base = config.scenario()?;
    base.jammer_present = true;
    let pairs: Vec<(usize, usize)> = config.sweep.users_blocks.iter().map(|[k, l]| (*k, *l)).collect();
    Ok(sweep_antennas(
        &base,
        &config.sweep.bs_antennas,
        &pairs,
        config.sweep.target_pfa,
        config.inversion(),
        config.detector.variant,
    )?)
}

pub fn fig1_records(rows: &[AntennaRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.bs_antennas.to_string(),
                r.users.to_string(),
                r.blocks.to_string(),
                r.pilot_len.to_string(),
                fmt_f64(r.q_db),
                fmt_f64(r.target_pfa),
                fmt_f64(r.mu_prime),
                fmt_f64(r.pc.rate),
                fmt_f64(r.pc_exact),
                fmt_f64(r.pc_asymp),
                fmt_f64(r.pc.ci95_low),
                fmt_f64(r.pc.ci95_high),
                r.n_trials.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect()
}

pub fn fig2_rows(config: &Config) -> Result<Vec<RocRow>> {
    check_roc_grid(&config.sweep.pfa_grid)?;
    let base = config.scenario()?;
    Ok(sweep_roc(&base, &config.sweep.pfa_grid, &config.sweep.q_db, config.inversion(), config.detector.variant)?)
}

pub fn fig2_records(rows: &[RocRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                fmt_f64(r.target_pfa),
                fmt_f64(r.q_db),
                fmt_f64(r.mu_prime),
                fmt_f64(r.pfa.rate),
                fmt_f64(r.pc.rate),
                fmt_f64(r.pc_exact),
                fmt_f64(r.pc_asymp),
                r.n_trials.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub points: Vec<PerformancePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_efficiency: Option<SpectralEfficiency>,
}

pub fn analyze(config: &Config) -> Result<AnalyzeReport> {
    let system = config.system_config()?;
    let dims = system.dims()?;
    let mu_prime = match config.analysis.mu_prime {
        Some(v) => v,
        None => config.detector_config().resolved(&dims)?.threshold().ok_or(jamdet::Error::UnresolvedThreshold)?,
    };
    let q_tilde = config.analysis.q_tilde.unwrap_or_else(|| system.effective_jamming_power());
    let points = [FormulaVariant::PaperExact, FormulaVariant::ComplexConsistent]
        .into_iter()
        .map(|v| PerformancePoint::evaluate(mu_prime, q_tilde, system.pilot_len, system.users, &dims, v))
        .collect::<jamdet::Result<Vec<_>>>()?;

    let a = &config.analysis;
    let spectral_efficiency = match (a.user_data_power, a.jammer_data_power) {
        (Some(rho), Some(varrho)) => {
            let params = SpectralEfficiencyParams {
                user_power: system.user_power,
                jammer_power: system.jammer_power,
                user_data_power: rho.linear(),
                jammer_data_power: varrho.linear(),
                user_fading: system.user_fading.clone(),
                jammer_fading: system.jammer_fading,
                pilot_len: system.pilot_len,
                coherence_len: system.coherence_len,
                jammer_antennas: system.jammer_antennas,
                pilot_weights: a.pilot_weights.clone().unwrap_or_else(|| {
                    SpectralEfficiencyParams::equal_split_weights(system.pilot_len, system.jammer_antennas)
                }),
            };
            Some(asymptotic_spectral_efficiency(&params)?)
        }
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "analysis: spectral efficiency needs both user_data_power and jammer_data_power".into(),
            ))
        }
    };
    Ok(AnalyzeReport { points, spectral_efficiency })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdEntry {
    pub inversion: ThresholdInversion,
    #[serde(flatten)]
    pub choice: ThresholdChoice,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub target_pfa: f64,
    pub bs_antennas: usize,
    pub blocks: usize,
    pub unused_pilots: usize,
    pub thresholds: Vec<ThresholdEntry>,
    /// `mu'` of the configured detector, whatever its source.
    pub detector_mu_prime: f64,
}

pub fn thresholds(config: &Config) -> Result<ThresholdReport> {
    let dims = config.system_config()?.dims()?;
    let target_pfa = config.detector.target_pfa.unwrap_or(DEFAULT_TARGET_PFA);
    let inversions = [
        ThresholdInversion::Exact(FormulaVariant::ComplexConsistent),
        ThresholdInversion::Exact(FormulaVariant::PaperExact),
        ThresholdInversion::Asymptotic,
    ];
    let thresholds = inversions
        .into_iter()
        .map(|inv| analysis::threshold_for_pfa(target_pfa, &dims, inv).map(|choice| ThresholdEntry { inversion: inv, choice }))
        .collect::<jamdet::Result<Vec<_>>>()?;
    let detector_mu_prime =
        config.detector_config().resolved(&dims)?.threshold().ok_or(jamdet::Error::UnresolvedThreshold)?;
    Ok(ThresholdReport {
        target_pfa,
        bs_antennas: dims.bs_antennas(),
        blocks: dims.blocks(),
        unused_pilots: dims.unused(),
        thresholds,
        detector_mu_prime,
    })
}

/// Observation file for `detect`: per block, real and imaginary parts as
/// `M_r x (tau - K)` row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFile {
    pub blocks: Vec<ObservationBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBlock {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ObservationFile {
    pub fn from_observations(obs: &UnusedPilotObservations) -> Self {
        let part = |b: &CMatrix, f: fn(&Complex64) -> f64| b.rows().into_iter().map(|r| r.iter().map(f).collect()).collect();
        Self { blocks: obs.blocks().iter().map(|b| ObservationBlock { re: part(b, |z| z.re), im: part(b, |z| z.im) }).collect() }
    }

    pub fn to_observations(&self) -> Result<UnusedPilotObservations> {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(l, b)| {
                let rows = b.re.len();
                let cols = b.re.first().map_or(0, Vec::len);
                let rect = |m: &Vec<Vec<f64>>| m.len() == rows && m.iter().all(|r| r.len() == cols);
                if !rect(&b.re) || !rect(&b.im) {
                    return Err(CliError::Input(format!("observation block {l}: re and im must be equal-sized rectangles")));
                }
                Ok(Array2::from_shape_fn((rows, cols), |(i, j)| Complex64::new(b.re[i][j], b.im[i][j])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UnusedPilotObservations::new(blocks)?)
    }
}

pub fn detect_observations(config: &Config, path: &Path) -> Result<DetectionReport> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let file: ObservationFile = serde_json::from_str(&text)?;
    let obs = file.to_observations()?;
    let system = config.system_config()?;
    let det = config.detector_config().resolved(&system.dims()?)?;
    Ok(detect(&obs, &system, &det)?)
}

pub fn detect_simulated(config: &Config) -> Result<DetectionReport> {
    let sc = config.scenario()?;
    Ok(run_trial(&sc, config.scenario.trial)?)
}

#[derive(Serialize)]
struct WithManifest<'a, T> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(sink: &mut Sink<'_>, manifest: &RunManifest, body: &T) -> Result<()> {
    sink.write_with(|w| {
        serde_json::to_writer_pretty(&mut *w, &WithManifest { manifest, body })?;
        writeln!(w)?;
        Ok(())
    })
}

/// Runs one command against a resolved config.
pub fn execute(
    command: CommandKind,
    config: &Config,
    observations: Option<&Path>,
    stdout: &mut dyn Write,
    out: Option<&Path>,
) -> Result<Outcome> {
    let started = Instant::now();
    let mut manifest = RunManifest::new(command, config);
    match command {
        CommandKind::Detect => {
            manifest.observations = observations.map(|p| p.display().to_string());
            let report = match observations {
                Some(p) => detect_observations(config, p)?,
                None => detect_simulated(config)?,
            };
            writeln!(stdout, "q_hat {}", report.q_hat)?;
            writeln!(stdout, "mu_prime {}", report.threshold_mu_prime)?;
            writeln!(stdout, "decision {}", if report.decision.is_detected() { "jammer-detected" } else { "clean" })?;
            if let Some(path) = out {
                let mut sink = Sink::File(path.into());
                finish(&mut manifest, &sink, started);
                write_json(&mut sink, &manifest, &report)?;
            }
            Ok(if report.decision.is_detected() { Outcome::Detected } else { Outcome::Clean })
        }
        CommandKind::Fig1 | CommandKind::Fig2 => {
            let (header, records): (&[&str], _) = if command == CommandKind::Fig1 {
                (&FIG1_HEADER, fig1_records(&fig1_rows(config)?))
            } else {
                (&FIG2_HEADER, fig2_records(&fig2_rows(config)?))
            };
            let mut sink = sink_for(stdout, out);
            finish(&mut manifest, &sink, started);
            sink.write_with(|w| write_table(w, &manifest, header, &records))?;
            Ok(Outcome::Done)
        }
        CommandKind::Analyze => {
            let report = analyze(config)?;
            let mut sink = sink_for(stdout, out);
            finish(&mut manifest, &sink, started);
            write_json(&mut sink, &manifest, &report)?;
            Ok(Outcome::Done)
        }
        CommandKind::Threshold => {
            let report = thresholds(config)?;
            let mut sink = sink_for(stdout, out);
            finish(&mut manifest, &sink, started);
            write_json(&mut sink, &manifest, &report)?;
            Ok(Outcome::Done)
        }
    }
}

fn sink_for<'a>(stdout: &'a mut dyn Write, out: Option<&Path>) -> Sink<'a> {
    match out {
        Some(p) => Sink::File(p.into()),
        None => Sink::Stdout(stdout),
    }
}

/// Reruns the command recorded in a table or JSON output.
pub fn replay(path: &Path, stdout: &mut dyn Write, out: Option<&Path>) -> Result<Outcome> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let manifest = manifest_from_text(&text)?;
    let observations = manifest.observations.as_deref().map(Path::new);
    execute(manifest.command, &manifest.config, observations, stdout, out)
}
