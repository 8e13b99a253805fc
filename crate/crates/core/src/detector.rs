//! GLRT jamming detector on unused pilots.
//!
//! Each row `y~_m(l)` of an unused-pilot block has covariance
//! `I + q~ 11^T`, so the likelihood depends on the data only through the
//! row energies and the row sums. Maximizing over `q~` gives a closed-form
//! estimate, and the generalized likelihood ratio is a monotone function of
//! that estimate. The test therefore reduces to comparing the clipped
//! estimate against a threshold `mu'`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::{self, special::log1p_minus, ThresholdInversion};
use crate::error::{Error, Result};
use crate::model::{ObservationDims, SystemConfig, UnusedPilotObservations};

/// `J(x) = x - ln(1 + x)`, increasing and convex on `x >= 0`.
pub fn j_function(x: f64) -> f64 {
    -log1p_minus(x)
}

/// Inverse of [`j_function`] on `[0, inf)`.
///
/// Newton from the right of the root converges monotonically because `J` is
/// convex; a step that leaves the bracket falls back to bisection.
pub fn j_inverse(y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("J^-1 is defined on [0, inf), got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * y + 2.0;
    // Small-y expansion J(x) ~ x^2/2, large-y J(x) ~ x - ln x.
    let mut x = if y < 1.0 { (2.0 * y).sqrt() } else { y + (1.0 + y).ln() };
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = j_function(x) - y;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = x / (1.0 + x);
        let mut next = if slope > 0.0 { x - f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-13 || hi - lo < 1e-13 {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence("J inverse"))
}

/// `S = sum_l sum_m |y~_m(l)^H 1|^2`, the squared modulus of every row sum.
pub fn sum_row_projections(obs: &UnusedPilotObservations) -> f64 {
    obs.rows().map(|row| row.sum().norm_sqr()).sum()
}

fn sum_row_energies(obs: &UnusedPilotObservations) -> f64 {
    obs.rows().flat_map(|row| row.into_iter()).map(|z| z.norm_sqr()).sum()
}

/// ML estimate of the effective jamming power, before and after clipping at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlEstimate {
    pub raw: f64,
    pub clipped: f64,
}

impl MlEstimate {
    /// `S / (M_r L n^2) - 1 / n`, with `n = tau - K`.
    pub fn from_sum(sum: f64, dims: &ObservationDims) -> Self {
        let n = dims.unused() as f64;
        let raw = sum / (dims.rows() as f64 * n * n) - 1.0 / n;
        Self { raw, clipped: raw.max(0.0) }
    }
}

/// ML estimate from observations, checked against the scenario shape.
pub fn ml_estimate(obs: &UnusedPilotObservations, cfg: &SystemConfig) -> Result<MlEstimate> {
    obs.check_matches(cfg)?;
    Ok(MlEstimate::from_sum(sum_row_projections(obs), &obs.dims()))
}

/// Normalization of the Gaussian log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodConvention {
    /// Real-Gaussian form: `1/2` factors and a `(2 pi)^(n/2)` normalizer.
    RealHalved,
    /// Circular complex Gaussian density `exp(-y^H C^-1 y) / (pi^n det C)`.
    Complex,
}

/// Log-likelihood of the observations at effective jamming power `q_tilde`.
pub fn log_likelihood(obs: &UnusedPilotObservations, q_tilde: f64, convention: LikelihoodConvention) -> Result<f64> {
    if !(q_tilde >= 0.0) {
        return Err(Error::InvalidArgument(format!("q_tilde must be nonnegative, got {q_tilde}")));
    }
    let dims = obs.dims();
    let rows = dims.rows() as f64;
    let n = dims.unused() as f64;
    let spread = 1.0 + n * q_tilde;
    let quad = sum_row_energies(obs) - q_tilde * sum_row_projections(obs) / spread;
    Ok(match convention {
        LikelihoodConvention::RealHalved => {
            -0.5 * rows * n * (2.0 * PI).ln() - 0.5 * rows * spread.ln() - 0.5 * quad
        }
        LikelihoodConvention::Complex => -rows * n * PI.ln() - rows * spread.ln() - quad,
    })
}

/// `ln` of the generalized likelihood ratio at estimate `q_hat`:
/// `-(M_r L / 2) ln(1 + n q^) + q^ S / (2 (1 + n q^))`.
pub fn glrt_log_statistic_from_sum(sum: f64, q_hat: f64, dims: &ObservationDims) -> Result<f64> {
    if !(q_hat >= 0.0) {
        return Err(Error::InvalidArgument(format!("q_hat must be nonnegative, got {q_hat}")));
    }
    let spread = 1.0 + dims.unused() as f64 * q_hat;
    Ok(-0.5 * dims.rows() as f64 * spread.ln() + q_hat * sum / (2.0 * spread))
}

pub fn glrt_log_statistic(obs: &UnusedPilotObservations, q_hat: f64, cfg: &SystemConfig) -> Result<f64> {
    obs.check_matches(cfg)?;
    glrt_log_statistic_from_sum(sum_row_projections(obs), q_hat, &obs.dims())
}

/// Threshold on the estimate implied by a likelihood-ratio threshold `mu >= 1`:
/// `mu' = J^-1((2 / (M_r L)) ln mu) / n`.
pub fn mu_prime_from_mu(mu: f64, dims: &ObservationDims) -> Result<f64> {
    if !(mu >= 1.0) {
        return Err(Error::Domain(format!("likelihood-ratio threshold must be at least 1, got {mu}")));
    }
    let y = 2.0 / dims.rows() as f64 * mu.ln();
    Ok(j_inverse(y)? / dims.unused() as f64)
}

/// Where the detector's threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    /// `mu'` given directly.
    MuPrime(f64),
    /// `mu'` chosen to meet a false-alarm target.
    TargetPfa { target: f64, inversion: ThresholdInversion },
    /// Likelihood-ratio threshold `mu`.
    MuLog(f64),
}

/// Detector threshold configuration.
///
/// The source is authoritative; `mu'` is derived from it by [`DetectorConfig::resolve`]
/// and cached, never set on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    source: ThresholdSource,
    #[serde(skip)]
    resolved: Option<f64>,
}

impl DetectorConfig {
    pub fn mu_prime(mu_prime: f64) -> Self {
        Self { source: ThresholdSource::MuPrime(mu_prime), resolved: None }
    }

    pub fn target_pfa(target: f64, inversion: ThresholdInversion) -> Self {
        Self { source: ThresholdSource::TargetPfa { target, inversion }, resolved: None }
    }

    pub fn mu_log(mu: f64) -> Self {
        Self { source: ThresholdSource::MuLog(mu), resolved: None }
    }

    pub fn source(&self) -> ThresholdSource {
        self.source
    }

    /// Cached `mu'`, if [`resolve`](Self::resolve) has run.
    pub fn threshold(&self) -> Option<f64> {
        self.resolved
    }

    /// Derives and caches `mu'` for observations of shape `dims`.
    pub fn resolve(&mut self, dims: &ObservationDims) -> Result<f64> {
        let mu_prime = match self.source {
            ThresholdSource::MuPrime(v) => {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("threshold must be finite, got {v}")));
                }
                v
            }
            ThresholdSource::TargetPfa { target, inversion } => analysis::threshold_for_pfa(target, dims, inversion)?.mu_prime,
            ThresholdSource::MuLog(mu) => mu_prime_from_mu(mu, dims)?,
        };
        self.resolved = Some(mu_prime);
        Ok(mu_prime)
    }

    pub fn resolved(mut self, dims: &ObservationDims) -> Result<Self> {
        self.resolve(dims)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Clean,
    JammerDetected,
}

impl Decision {
    pub fn is_detected(self) -> bool {
        matches!(self, Decision::JammerDetected)
    }
}

/// Outcome of one detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub q_hat: f64,
    pub raw_q_hat: f64,
    /// `J((tau - K) q^)`.
    pub statistic_j: f64,
    pub threshold_mu_prime: f64,
    pub decision: Decision,
}

/// Strict comparison: a tie decides for the clean hypothesis.
pub fn decide(q_hat: f64, det: &DetectorConfig) -> Result<Decision> {
    let mu_prime = det.threshold().ok_or(Error::UnresolvedThreshold)?;
    Ok(if q_hat > mu_prime { Decision::JammerDetected } else { Decision::Clean })
}

impl DetectionReport {
    pub fn new(estimate: MlEstimate, dims: &ObservationDims, det: &DetectorConfig) -> Result<Self> {
        let decision = decide(estimate.clipped, det)?;
        Ok(Self {
            q_hat: estimate.clipped,
            raw_q_hat: estimate.raw,
            statistic_j: j_function(dims.unused() as f64 * estimate.clipped),
            threshold_mu_prime: det.threshold().ok_or(Error::UnresolvedThreshold)?,
            decision,
        })
    }
}

/// Estimate, reduce, and decide on one set of observations.
pub fn detect(obs: &UnusedPilotObservations, cfg: &SystemConfig, det: &DetectorConfig) -> Result<DetectionReport> {
    let estimate = ml_estimate(obs, cfg)?;
    DetectionReport::new(estimate, &obs.dims(), det)
}
