//! Deterministic Monte Carlo evaluation of the detector.
//!
//! Trial `t` draws its `L` blocks from streams keyed by `(seed, t, l, role)`,
//! so a trial's outcome depends on nothing but the scenario and its index.
//! Trials run on the current rayon pool and are collected in index order;
//! every aggregate is then folded sequentially, which keeps results
//! bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, FormulaVariant, ThresholdInversion};
use crate::detector::{sum_row_projections, DetectionReport, DetectorConfig, MlEstimate};
use crate::error::{Error, Result};
use crate::model::{
    self, db_to_linear, equal_split_coefficients, BlockOptions, CMatrix, ObservationDims, PilotAssignment, PilotBook,
    SystemConfig, UnusedPilotObservations,
};
use crate::rng::{StreamKey, StreamRole, TRIAL_LEVEL};

/// 97.5% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// How each block's unused-pilot observations are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    /// Build the full received matrix, then project onto the unused pilots.
    #[default]
    FullBlock,
    /// Draw the projections directly (same distribution, less work).
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JammerMode {
    /// Fresh equal-split coefficients in every block.
    #[default]
    PerBlock,
    /// One draw per trial, reused across its blocks.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotMode {
    /// Users hold pilots `0..K`.
    #[default]
    FirstK,
    /// Users hold a random subset, redrawn per trial.
    Permuted,
}

/// Everything that determines a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub detector: DetectorConfig,
    pub jammer_present: bool,
    pub n_trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub simulation: SimulationMode,
    #[serde(default)]
    pub jammer_mode: JammerMode,
    #[serde(default)]
    pub pilots: PilotMode,
}

impl Scenario {
    pub fn new(system: SystemConfig, detector: DetectorConfig, jammer_present: bool, n_trials: u64, seed: u64) -> Self {
        Self {
            system,
            detector,
            jammer_present,
            n_trials,
            seed,
            simulation: SimulationMode::default(),
            jammer_mode: JammerMode::default(),
            pilots: PilotMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.n_trials < 1 {
            return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
        }
        Ok(())
    }

    /// The detector with its threshold resolved for this scenario's shape.
    pub fn resolved_detector(&self) -> Result<DetectorConfig> {
        let dims = self.system.dims()?;
        self.detector.clone().resolved(&dims)
    }
}

/// Runs `f` inside a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Sizes the process-wide pool that runs use when not inside [`with_workers`].
/// Only the first call in a process can succeed.
pub fn init_global_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))
}

fn trial_assignment(sc: &Scenario, trial: u64) -> Result<PilotAssignment> {
    let cfg = &sc.system;
    match sc.pilots {
        PilotMode::FirstK => PilotAssignment::first_k(cfg.pilot_len, cfg.users),
        PilotMode::Permuted => {
            let mut rng = StreamKey::new(sc.seed, trial, TRIAL_LEVEL, StreamRole::PilotAssignment).rng();
            PilotAssignment::permuted(cfg.pilot_len, cfg.users, &mut rng)
        }
    }
}

/// Observations of one trial.
pub fn trial_observations(sc: &Scenario, book: &PilotBook, trial: u64) -> Result<UnusedPilotObservations> {
    let cfg = &sc.system;
    let assignment = trial_assignment(sc, trial)?;
    let coeff_key = |block| StreamKey::new(sc.seed, trial, block, StreamRole::JammerCoefficients);
    let fixed: Option<CMatrix> = match sc.jammer_mode {
        JammerMode::Fixed => {
            Some(equal_split_coefficients(cfg.pilot_len, cfg.jammer_antennas, &mut coeff_key(TRIAL_LEVEL).rng()))
        }
        JammerMode::PerBlock => None,
    };
    let blocks = (0..cfg.blocks as u64)
        .map(|l| {
            let coeffs = match &fixed {
                Some(c) => c.clone(),
                None => equal_split_coefficients(cfg.pilot_len, cfg.jammer_antennas, &mut coeff_key(l).rng()),
            };
            let mut rng = StreamKey::new(sc.seed, trial, l, StreamRole::BlockDraw).rng();
            match sc.simulation {
                SimulationMode::FullBlock => {
                    let block = model::draw_block(
                        cfg,
                        book,
                        coeffs.view(),
                        &assignment,
                        sc.jammer_present,
                        BlockOptions::default(),
                        &mut rng,
                    )?;
                    model::project_unused(&block, book, &assignment)
                }
                SimulationMode::Projected => {
                    model::draw_unused_projection(cfg, coeffs.view(), &assignment, sc.jammer_present, &mut rng)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    UnusedPilotObservations::new(blocks)
}

fn trial_estimate(sc: &Scenario, book: &PilotBook, dims: &ObservationDims, trial: u64) -> Result<MlEstimate> {
    let obs = trial_observations(sc, book, trial)?;
    Ok(MlEstimate::from_sum(sum_row_projections(&obs), dims))
}

/// Full detection report for a single trial.
pub fn run_trial(sc: &Scenario, trial: u64) -> Result<DetectionReport> {
    sc.validate()?;
    let det = sc.resolved_detector()?;
    let book = PilotBook::new(sc.system.pilot_len)?;
    let dims = sc.system.dims()?;
    let estimate = trial_estimate(sc, &book, &dims, trial).map_err(|e| Error::Trial { index: trial, source: Box::new(e) })?;
    DetectionReport::new(estimate, &dims, &det)
}

/// ML estimates of every trial, in trial order.
pub fn simulate_estimates(sc: &Scenario) -> Result<Vec<MlEstimate>> {
    sc.validate()?;
    let book = PilotBook::new(sc.system.pilot_len)?;
    let dims = sc.system.dims()?;
    (0..sc.n_trials)
        .into_par_iter()
        .map(|t| trial_estimate(sc, &book, &dims, t).map_err(|e| Error::Trial { index: t, source: Box::new(e) }))
        .collect()
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Empirical detection rate with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub detections: u64,
    pub n_trials: u64,
    pub rate: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_q_hat: f64,
}

impl EmpiricalEstimate {
    /// Applies threshold `mu_prime` (strictly) to per-trial estimates.
    pub fn from_estimates(estimates: &[MlEstimate], mu_prime: f64) -> Result<Self> {
        if estimates.is_empty() {
            return Err(Error::InvalidArgument("no trials to aggregate".into()));
        }
        let n = estimates.len() as u64;
        let detections = estimates.iter().filter(|e| e.clipped > mu_prime).count() as u64;
        let mean_q_hat = estimates.iter().map(|e| e.clipped).sum::<f64>() / n as f64;
        let (ci95_low, ci95_high) = wilson_interval(detections, n, Z_95);
        Ok(Self { detections, n_trials: n, rate: detections as f64 / n as f64, ci95_low, ci95_high, mean_q_hat })
    }

    pub fn sigma(&self) -> f64 {
        binomial_sigma(self.rate, self.n_trials)
    }
}

/// Runs every trial of the scenario and aggregates the decisions.
pub fn run_trials(sc: &Scenario) -> Result<EmpiricalEstimate> {
    let det = sc.resolved_detector()?;
    let estimates = simulate_estimates(sc)?;
    EmpiricalEstimate::from_estimates(&estimates, det.threshold().ok_or(Error::UnresolvedThreshold)?)
}

/// One point of a correct-detection versus antenna-count sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaRow {
    pub bs_antennas: usize,
    pub users: usize,
    pub blocks: usize,
    pub pilot_len: usize,
    pub q_db: f64,
    pub target_pfa: f64,
    pub mu_prime: f64,
    pub pc: EmpiricalEstimate,
    /// Exact closed form of the requested variant.
    pub pc_exact: f64,
    pub pc_asymp: f64,
    pub n_trials: u64,
    pub seed: u64,
}

fn jammer_power_db(cfg: &SystemConfig) -> f64 {
    model::linear_to_db(cfg.jammer_power)
}

/// Correct detection over a grid of antenna counts and `(K, L)` pairs, with
/// the threshold recomputed per point from a fixed false-alarm target.
pub fn sweep_antennas(
    base: &Scenario,
    antenna_counts: &[usize],
    users_and_blocks: &[(usize, usize)],
    target_pfa: f64,
    inversion: ThresholdInversion,
    variant: FormulaVariant,
) -> Result<Vec<AntennaRow>> {
    let mut rows = Vec::with_capacity(antenna_counts.len() * users_and_blocks.len());
    for &(users, blocks) in users_and_blocks {
        for &bs_antennas in antenna_counts {
            let system = SystemConfig { bs_antennas, blocks, ..base.system.clone() }.with_users(users);
            let dims = system.dims()?;
            let mu_prime = analysis::threshold_for_pfa(target_pfa, &dims, inversion)?.mu_prime;
            let q_tilde = system.effective_jamming_power();
            let sc = Scenario {
                system: system.clone(),
                detector: DetectorConfig::mu_prime(mu_prime),
                jammer_present: true,
                ..base.clone()
            };
            let pc = run_trials(&sc)?;
            rows.push(AntennaRow {
                bs_antennas,
                users,
                blocks,
                pilot_len: system.pilot_len,
                q_db: jammer_power_db(&system),
                target_pfa,
                mu_prime,
                pc,
                pc_exact: analysis::pc_exact(mu_prime, q_tilde, &dims, variant)?,
                pc_asymp: analysis::pc_asymptotic(mu_prime, q_tilde, &dims)?,
                n_trials: base.n_trials,
                seed: base.seed,
            });
        }
    }
    Ok(rows)
}

/// One point of a correct-detection versus false-alarm sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub target_pfa: f64,
    pub q_db: f64,
    pub mu_prime: f64,
    pub pfa: EmpiricalEstimate,
    pub pc: EmpiricalEstimate,
    pub pc_exact: f64,
    pub pc_asymp: f64,
    pub n_trials: u64,
    pub seed: u64,
}

/// Largest false-alarm target a ROC sweep accepts; beyond it `mu' < 0` and
/// both rates saturate at one. Exact inversion already gives a slightly
/// negative `mu'` at 0.5 itself (the gamma median sits below its mean), so
/// that endpoint saturates too unless the asymptotic inversion is used.
pub const MAX_ROC_PFA: f64 = 0.5;

pub fn check_roc_grid(pfa_grid: &[f64]) -> Result<()> {
    if pfa_grid.is_empty() {
        return Err(Error::InvalidArgument("false-alarm grid is empty".into()));
    }
    if let Some(p) = pfa_grid.iter().find(|p| !(**p > 0.0 && **p <= MAX_ROC_PFA)) {
        return Err(Error::InvalidArgument(format!(
            "false-alarm target {p} outside (0, {MAX_ROC_PFA}]: above 0.5 the threshold mu' turns negative \
             and the clipped estimate always exceeds it, so both rates are one"
        )));
    }
    Ok(())
}

/// Correct versus false-alarm detection over a target grid and jammer powers.
///
/// One clean run and one jammed run per power are shared across the grid;
/// each grid point only re-thresholds the stored estimates.
pub fn sweep_roc(
    base: &Scenario,
    pfa_grid: &[f64],
    q_db_list: &[f64],
    inversion: ThresholdInversion,
    variant: FormulaVariant,
) -> Result<Vec<RocRow>> {
    check_roc_grid(pfa_grid)?;
    let dims = base.system.dims()?;
    let thresholds = pfa_grid
        .iter()
        .map(|&t| analysis::threshold_for_pfa(t, &dims, inversion).map(|c| c.mu_prime))
        .collect::<Result<Vec<_>>>()?;
    let clean = Scenario { jammer_present: false, ..base.clone() };
    let clean_estimates = simulate_estimates(&clean)?;

    let mut rows = Vec::with_capacity(pfa_grid.len() * q_db_list.len());
    for &q_db in q_db_list {
        let system = SystemConfig { jammer_power: db_to_linear(q_db), ..base.system.clone() };
        let q_tilde = system.effective_jamming_power();
        let jammed = Scenario { system, jammer_present: true, ..base.clone() };
        let jammed_estimates = simulate_estimates(&jammed)?;
        for (&target_pfa, &mu_prime) in pfa_grid.iter().zip(&thresholds) {
            rows.push(RocRow {
                target_pfa,
                q_db,
                mu_prime,
                pfa: EmpiricalEstimate::from_estimates(&clean_estimates, mu_prime)?,
                pc: EmpiricalEstimate::from_estimates(&jammed_estimates, mu_prime)?,
                pc_exact: analysis::pc_exact(mu_prime, q_tilde, &dims, variant)?,
                pc_asymp: analysis::pc_asymptotic(mu_prime, q_tilde, &dims)?,
                n_trials: base.n_trials,
                seed: base.seed,
            });
        }
    }
    Ok(rows)
}
