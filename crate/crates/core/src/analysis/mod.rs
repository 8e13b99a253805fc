//! Closed-form detector performance.
//!
//! Under either hypothesis each row sum `y~_m(l)^H 1` is a zero-mean complex
//! Gaussian, with variance `n` without the jammer and `n (1 + n q~)` with it
//! (`n = tau - K`). The pooled statistic `S / n` is therefore Gamma-distributed
//! with shape `M_r L`, and both error probabilities are regularized upper
//! incomplete gamma tails evaluated at the threshold. For large `M_r L` they
//! approach Gaussian tails.
//!
//! Two scalings of the gamma argument are provided. [`FormulaVariant::PaperExact`]
//! halves the argument, matching a real-Gaussian (chi-square with `2 M_r L`
//! degrees of freedom) reading of the statistic; [`FormulaVariant::ComplexConsistent`]
//! uses the unit-variance complex model the simulator draws from, and is the
//! one that converges to the Gaussian tails.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ObservationDims;

pub use special::{
    inverse_regularized_lower_gamma, inverse_regularized_upper_gamma, q_function, q_function_inverse,
    regularized_lower_gamma, regularized_upper_gamma,
};

/// Scaling of the gamma argument in the exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FormulaVariant {
    /// Argument divided by two, as for a real chi-square statistic.
    #[serde(rename = "paper")]
    PaperExact,
    /// Argument for `CN(0, 1)` observations.
    #[default]
    #[serde(rename = "consistent")]
    ComplexConsistent,
}

impl FormulaVariant {
    fn argument_divisor(self) -> f64 {
        match self {
            FormulaVariant::PaperExact => 2.0,
            FormulaVariant::ComplexConsistent => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FormulaVariant::PaperExact => "paper",
            FormulaVariant::ComplexConsistent => "consistent",
        }
    }
}

impl std::str::FromStr for FormulaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper-exact" => Ok(FormulaVariant::PaperExact),
            "consistent" | "complex-consistent" => Ok(FormulaVariant::ComplexConsistent),
            other => Err(Error::InvalidArgument(format!("unknown formula variant `{other}` (expected paper|consistent)"))),
        }
    }
}

/// How a target false-alarm probability is turned into `mu'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "variant")]
pub enum ThresholdInversion {
    /// Invert the exact gamma tail of the given variant.
    Exact(FormulaVariant),
    /// Invert the Gaussian tail.
    Asymptotic,
}

impl Default for ThresholdInversion {
    fn default() -> Self {
        ThresholdInversion::Exact(FormulaVariant::ComplexConsistent)
    }
}

/// Effective jamming power `q M_w beta_w`.
pub fn q_tilde(jammer_power: f64, jammer_antennas: usize, jammer_fading: f64) -> Result<f64> {
    if !(jammer_power >= 0.0) {
        return Err(Error::InvalidArgument(format!("jammer power must be nonnegative, got {jammer_power}")));
    }
    if !(jammer_fading > 0.0) {
        return Err(Error::InvalidArgument(format!("jammer fading must be positive, got {jammer_fading}")));
    }
    Ok(jammer_power * jammer_antennas as f64 * jammer_fading)
}

fn check_q_tilde(q_tilde: f64) -> Result<()> {
    if !(q_tilde >= 0.0) {
        return Err(Error::InvalidArgument(format!("effective jamming power must be nonnegative, got {q_tilde}")));
    }
    Ok(())
}

/// `M_r L (tau-K) mu' + M_r L`: the threshold on `S / (tau-K)`.
fn statistic_threshold(mu_prime: f64, dims: &ObservationDims) -> f64 {
    let rows = dims.rows() as f64;
    rows * dims.unused() as f64 * mu_prime + rows
}

fn upper_tail(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_upper_gamma(shape, x).expect("shape is a positive row count")
}

/// Exact false-alarm probability `Pr(q^ > mu' | H0)`.
///
/// The clipped estimate is never negative, so any `mu' < 0` fires always.
pub fn pfa_exact(mu_prime: f64, dims: &ObservationDims, variant: FormulaVariant) -> f64 {
    if mu_prime < 0.0 {
        return 1.0;
    }
    let x = statistic_threshold(mu_prime, dims);
    upper_tail(dims.rows() as f64, x / variant.argument_divisor())
}

/// Gaussian-limit false-alarm probability `Q(sqrt(M_r L) mu' (tau-K))`.
pub fn pfa_asymptotic(mu_prime: f64, dims: &ObservationDims) -> f64 {
    q_function((dims.rows() as f64).sqrt() * mu_prime * dims.unused() as f64)
}

/// Exact correct-detection probability `Pr(q^ > mu' | H1)`.
pub fn pc_exact(mu_prime: f64, q_tilde: f64, dims: &ObservationDims, variant: FormulaVariant) -> Result<f64> {
    check_q_tilde(q_tilde)?;
    if mu_prime < 0.0 {
        return Ok(1.0);
    }
    let x = statistic_threshold(mu_prime, dims);
    let spread = 1.0 + dims.unused() as f64 * q_tilde;
    Ok(upper_tail(dims.rows() as f64, x / (variant.argument_divisor() * spread)))
}

/// Gaussian-limit correct-detection probability.
pub fn pc_asymptotic(mu_prime: f64, q_tilde: f64, dims: &ObservationDims) -> Result<f64> {
    check_q_tilde(q_tilde)?;
    let n = dims.unused() as f64;
    let arg = (dims.rows() as f64).sqrt() * (q_tilde - mu_prime) * n / (1.0 + n * q_tilde);
    Ok(1.0 - q_function(arg))
}

/// Threshold `mu'` chosen to meet a target false-alarm probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub mu_prime: f64,
    /// Set when `mu' < 0`: every clipped estimate exceeds it and the detector always fires.
    pub negative: bool,
}

/// Inverts the selected false-alarm formula at `target_pfa`.
pub fn threshold_for_pfa(target_pfa: f64, dims: &ObservationDims, inversion: ThresholdInversion) -> Result<ThresholdChoice> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::InvalidArgument(format!("target false-alarm probability must lie in (0, 1), got {target_pfa}")));
    }
    let rows = dims.rows() as f64;
    let n = dims.unused() as f64;
    let mu_prime = match inversion {
        ThresholdInversion::Exact(variant) => {
            let x = inverse_regularized_upper_gamma(rows, target_pfa)?;
            (x * variant.argument_divisor() - rows) / (rows * n)
        }
        ThresholdInversion::Asymptotic => q_function_inverse(target_pfa)? / (rows.sqrt() * n),
    };
    Ok(ThresholdChoice { mu_prime, negative: mu_prime < 0.0 })
}

/// Exact and asymptotic probabilities at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformancePoint {
    pub mu_prime: f64,
    pub q_tilde: f64,
    pub bs_antennas: usize,
    pub blocks: usize,
    pub pilot_len: usize,
    pub users: usize,
    pub variant: FormulaVariant,
    pub pfa: f64,
    pub pc: f64,
    pub pfa_asymp: f64,
    pub pc_asymp: f64,
}

impl PerformancePoint {
    pub fn evaluate(mu_prime: f64, q_tilde: f64, pilot_len: usize, users: usize, dims: &ObservationDims, variant: FormulaVariant) -> Result<Self> {
        if pilot_len.checked_sub(users) != Some(dims.unused()) {
            return Err(Error::DimensionMismatch(format!(
                "tau={pilot_len}, K={users} does not leave {} unused pilots",
                dims.unused()
            )));
        }
        Ok(Self {
            mu_prime,
            q_tilde,
            bs_antennas: dims.bs_antennas(),
            blocks: dims.blocks(),
            pilot_len,
            users,
            variant,
            pfa: pfa_exact(mu_prime, dims, variant),
            pc: pc_exact(mu_prime, q_tilde, dims, variant)?,
            pfa_asymp: pfa_asymptotic(mu_prime, dims),
            pc_asymp: pc_asymptotic(mu_prime, q_tilde, dims)?,
        })
    }
}

/// Inputs of the large-array spectral efficiency under pilot-phase jamming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEfficiencyParams {
    /// Pilot power per user `p`.
    pub user_power: f64,
    /// Jammer pilot power per antenna `q`.
    pub jammer_power: f64,
    /// Average user data power `rho`.
    pub user_data_power: f64,
    /// Average jammer data power per antenna `varrho`.
    pub jammer_data_power: f64,
    /// `beta_i` for the `K` users.
    pub user_fading: Vec<f64>,
    pub jammer_fading: f64,
    pub pilot_len: usize,
    pub coherence_len: usize,
    pub jammer_antennas: usize,
    /// `w_i = sum_j |c_ij|^2` for every pilot; users hold the first `K`.
    pub pilot_weights: Vec<f64>,
}

impl SpectralEfficiencyParams {
    /// Weights of the equal-split jammer, `M_w / tau` on every pilot.
    pub fn equal_split_weights(pilot_len: usize, jammer_antennas: usize) -> Vec<f64> {
        vec![jammer_antennas as f64 / pilot_len as f64; pilot_len]
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidArgument(m));
        if self.pilot_len == 0 || self.pilot_len > self.coherence_len {
            return invalid(format!("need 1 <= tau <= T, got tau={}, T={}", self.pilot_len, self.coherence_len));
        }
        if self.pilot_weights.len() != self.pilot_len {
            return invalid(format!("{} pilot weights for {} pilots", self.pilot_weights.len(), self.pilot_len));
        }
        if self.user_fading.len() > self.pilot_len {
            return invalid(format!("{} users but only {} pilots", self.user_fading.len(), self.pilot_len));
        }
        if self.pilot_weights.iter().any(|w| !(*w >= 0.0)) {
            return invalid("pilot weights must be nonnegative".into());
        }
        let total: f64 = self.pilot_weights.iter().sum();
        let m_w = self.jammer_antennas as f64;
        if (total - m_w).abs() > 1e-9 * m_w.max(1.0) {
            return invalid(format!("pilot weights sum to {total}, jammer power constraint requires {m_w}"));
        }
        let nonneg = [self.user_power, self.jammer_power, self.user_data_power, self.jammer_data_power];
        if nonneg.iter().any(|v| !(*v >= 0.0)) || self.user_fading.iter().any(|b| !(*b > 0.0)) || !(self.jammer_fading > 0.0) {
            return invalid("powers must be nonnegative and fading coefficients positive".into());
        }
        Ok(())
    }
}

/// A rate that may grow without bound in the large-array limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Unbounded,
}

impl Rate {
    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(v) => Some(v),
            Rate::Unbounded => None,
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Finite(v) => s.serialize_f64(*v),
            Rate::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEfficiency {
    /// Per-user rate in bit/s/Hz.
    pub per_user: Vec<Rate>,
    pub sum: Rate,
}

/// Large-array spectral efficiency per user and summed.
///
/// A user whose pilot carries no jamming (`w_i = 0`), or a jammer with no
/// pilot or data power, leaves that rate unbounded.
pub fn asymptotic_spectral_efficiency(params: &SpectralEfficiencyParams) -> Result<SpectralEfficiency> {
    params.validate()?;
    let pre_log = 1.0 - params.pilot_len as f64 / params.coherence_len as f64;
    let m_w = params.jammer_antennas as f64;
    let per_user: Vec<Rate> = params
        .user_fading
        .iter()
        .zip(&params.pilot_weights)
        .map(|(beta, w)| {
            let denom = params.jammer_power * params.jammer_data_power * m_w * w;
            if denom == 0.0 || params.jammer_fading == 0.0 {
                return Rate::Unbounded;
            }
            let ratio = beta / params.jammer_fading;
            let sinr = params.user_power * params.user_data_power * ratio * ratio / denom;
            Rate::Finite(pre_log * sinr.ln_1p() / std::f64::consts::LN_2)
        })
        .collect();
    let sum = per_user
        .iter()
        .try_fold(0.0, |acc, r| r.finite().map(|v| acc + v))
        .map_or(Rate::Unbounded, Rate::Finite);
    Ok(SpectralEfficiency { per_user, sum })
}
