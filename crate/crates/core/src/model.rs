//! Uplink pilot phase under a multi-antenna jammer.
//!
//! One coherence block carries `tau` orthonormal pilots. The first `K` (or a
//! permuted set of `K`) go to single-antenna users and the rest are left
//! unused. The jammer spreads its power over every pilot direction, so the
//! unused pilots see jamming and noise but no user signal. Projecting the
//! received matrix onto those pilots yields the detector's observations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = Array2<Complex64>;

const POWER_REL_TOL: f64 = 1e-9;

/// Circularly-symmetric complex Gaussian with unit total variance.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

fn complex_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    Array2::from_shape_simple_fn((rows, cols), || complex_normal(rng))
}

/// Scenario scalars. Powers are linear and relative to unit noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas `M_r`.
    pub bs_antennas: usize,
    /// Jammer antennas `M_w`.
    pub jammer_antennas: usize,
    /// Active users `K`.
    pub users: usize,
    /// Pilot length, equal to the number of orthogonal pilots `tau`.
    pub pilot_len: usize,
    /// Coherence blocks `L` pooled by the detector.
    pub blocks: usize,
    /// Per-user pilot power `p`.
    pub user_power: f64,
    /// Jammer per-antenna pilot power `q`.
    pub jammer_power: f64,
    /// Large-scale fading `beta_i`, one per user.
    pub user_fading: Vec<f64>,
    /// Jammer large-scale fading `beta_w`.
    pub jammer_fading: f64,
    /// Coherence block length `T` in samples.
    pub coherence_len: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            bs_antennas: 100,
            jammer_antennas: 4,
            users: 8,
            pilot_len: 10,
            blocks: 10,
            user_power: 1.0,
            jammer_power: db_to_linear(-17.0),
            user_fading: vec![1.0; 8],
            jammer_fading: 1.0,
            coherence_len: 200,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

impl SystemConfig {
    /// Sets the user count, resizing `user_fading` with unit coefficients.
    pub fn with_users(mut self, users: usize) -> Self {
        self.users = users;
        self.user_fading.resize(users, 1.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.bs_antennas < 1 {
            return invalid("bs_antennas must be at least 1".into());
        }
        if self.jammer_antennas < 1 {
            return invalid("jammer_antennas must be at least 1".into());
        }
        if self.pilot_len < 1 {
            return invalid("pilot_len must be at least 1".into());
        }
        if self.blocks < 1 {
            return invalid("blocks must be at least 1".into());
        }
        if self.users >= self.pilot_len {
            return Err(Error::NoUnusedPilots { users: self.users, pilots: self.pilot_len });
        }
        if self.pilot_len > self.coherence_len {
            return invalid(format!(
                "pilot_len ({}) exceeds coherence_len ({})",
                self.pilot_len, self.coherence_len
            ));
        }
        if !(self.user_power >= 0.0) || !self.user_power.is_finite() {
            return invalid(format!("user_power must be a finite nonnegative value, got {}", self.user_power));
        }
        if !(self.jammer_power >= 0.0) || !self.jammer_power.is_finite() {
            return invalid(format!("jammer_power must be a finite nonnegative value, got {}", self.jammer_power));
        }
        if self.user_fading.len() != self.users {
            return invalid(format!(
                "user_fading has {} entries for {} users",
                self.user_fading.len(),
                self.users
            ));
        }
        if let Some(b) = self.user_fading.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return invalid(format!("user_fading entries must be nonnegative, got {b}"));
        }
        if !(self.jammer_fading > 0.0) || !self.jammer_fading.is_finite() {
            return invalid(format!("jammer_fading must be positive, got {}", self.jammer_fading));
        }
        Ok(())
    }

    pub fn unused_pilots(&self) -> usize {
        self.pilot_len.saturating_sub(self.users)
    }

    pub fn dims(&self) -> Result<ObservationDims> {
        if self.users >= self.pilot_len {
            return Err(Error::NoUnusedPilots { users: self.users, pilots: self.pilot_len });
        }
        ObservationDims::new(self.bs_antennas, self.blocks, self.unused_pilots())
    }

    /// Effective jamming power `q M_w beta_w` seen on each unused pilot.
    pub fn effective_jamming_power(&self) -> f64 {
        self.jammer_power * self.jammer_antennas as f64 * self.jammer_fading
    }
}

/// Shape of a stack of unused-pilot observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationDims {
    bs_antennas: usize,
    blocks: usize,
    unused: usize,
}

impl ObservationDims {
    pub fn new(bs_antennas: usize, blocks: usize, unused: usize) -> Result<Self> {
        if bs_antennas == 0 || blocks == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least one antenna and one block, got M_r={bs_antennas}, L={blocks}"
            )));
        }
        if unused == 0 {
            return Err(Error::InvalidArgument("need at least one unused pilot".into()));
        }
        Ok(Self { bs_antennas, blocks, unused })
    }

    pub fn bs_antennas(&self) -> usize {
        self.bs_antennas
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Unused pilots `tau - K`.
    pub fn unused(&self) -> usize {
        self.unused
    }

    /// Number of independent row vectors, `M_r L`.
    pub fn rows(&self) -> usize {
        self.bs_antennas * self.blocks
    }
}

/// Orthonormal pilot set stored column-wise: column `i` is pilot `i`.
///
/// Pilots are scaled DFT vectors `phi_i[n] = exp(j 2 pi i n / tau) / sqrt(tau)`,
/// which are orthonormal under the pairing `phi_i^T conj(phi_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pilots: CMatrix,
}

impl PilotBook {
    pub fn new(tau: usize) -> Result<Self> {
        if tau < 1 {
            return Err(Error::InvalidArgument("pilot length must be at least 1".into()));
        }
        let scale = 1.0 / (tau as f64).sqrt();
        let pilots = Array2::from_shape_fn((tau, tau), |(n, i)| {
            // Reduce i*n mod tau before the trig call to keep phases exact-ish.
            let k = (i * n) % tau;
            Complex64::from_polar(scale, 2.0 * PI * k as f64 / tau as f64)
        });
        Ok(Self { pilots })
    }

    pub fn len(&self) -> usize {
        self.pilots.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pilot(&self, i: usize) -> ndarray::ArrayView1<'_, Complex64> {
        self.pilots.column(i)
    }

    pub fn as_matrix(&self) -> ArrayView2<'_, Complex64> {
        self.pilots.view()
    }

    /// `phi_i^T conj(phi_t)`.
    pub fn pairing(&self, i: usize, t: usize) -> Complex64 {
        self.pilot(i).iter().zip(self.pilot(t).iter()).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn gram(&self) -> CMatrix {
        let n = self.len();
        Array2::from_shape_fn((n, n), |(i, t)| self.pairing(i, t))
    }
}

/// Which pilots the users hold and which stay unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    user_pilots: Vec<usize>,
    unused: Vec<usize>,
}

impl PilotAssignment {
    /// Users take pilots `0..K`; the rest are unused.
    pub fn first_k(tau: usize, users: usize) -> Result<Self> {
        if users >= tau {
            return Err(Error::NoUnusedPilots { users, pilots: tau });
        }
        Ok(Self { user_pilots: (0..users).collect(), unused: (users..tau).collect() })
    }

    /// Users take a uniformly random subset of pilots. The unused set is kept
    /// in ascending pilot order.
    pub fn permuted<R: Rng + ?Sized>(tau: usize, users: usize, rng: &mut R) -> Result<Self> {
        if users >= tau {
            return Err(Error::NoUnusedPilots { users, pilots: tau });
        }
        let mut order: Vec<usize> = (0..tau).collect();
        order.shuffle(rng);
        let user_pilots = order[..users].to_vec();
        let mut unused = order[users..].to_vec();
        unused.sort_unstable();
        Ok(Self { user_pilots, unused })
    }

    pub fn user_pilots(&self) -> &[usize] {
        &self.user_pilots
    }

    pub fn unused(&self) -> &[usize] {
        &self.unused
    }

    pub fn pilot_count(&self) -> usize {
        self.user_pilots.len() + self.unused.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JammerStrategy {
    /// Power `M_w / tau` on every pilot.
    EqualSplit,
    Custom,
}

/// Effective jammer coefficients `c_ij(l)` for each block.
///
/// Entry `(i, j)` of block `l` is the weight with which jammer antenna `j`
/// transmits along pilot `i`, i.e. the product of its precoder row and the
/// pilot expansion of its jamming sequence. Only these products reach the
/// received signal, so the precoder and sequences are not stored apart.
#[derive(Debug, Clone, PartialEq)]
pub struct JammerProfile {
    coeffs: Vec<CMatrix>,
    strategy: JammerStrategy,
}

/// One block of equal-split coefficients: `c_ij = exp(j theta_j) / sqrt(tau)`
/// with an independent uniform phase per antenna.
pub fn equal_split_coefficients<R: Rng + ?Sized>(tau: usize, jammer_antennas: usize, rng: &mut R) -> CMatrix {
    let amp = 1.0 / (tau as f64).sqrt();
    let phases: Vec<Complex64> = (0..jammer_antennas)
        .map(|_| Complex64::from_polar(amp, rng.random_range(0.0..2.0 * PI)))
        .collect();
    Array2::from_shape_fn((tau, jammer_antennas), |(_, j)| phases[j])
}

impl JammerProfile {
    /// Draws `L` blocks of equal-split coefficients.
    pub fn equal_split<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let coeffs = (0..cfg.blocks)
            .map(|_| equal_split_coefficients(cfg.pilot_len, cfg.jammer_antennas, rng))
            .collect();
        Ok(Self { coeffs, strategy: JammerStrategy::EqualSplit })
    }

    /// Wraps caller-supplied coefficients after checking shape and the total
    /// power constraint `sum_ij |c_ij|^2 = M_w`.
    pub fn custom(cfg: &SystemConfig, coeffs: Vec<CMatrix>) -> Result<Self> {
        cfg.validate()?;
        if coeffs.len() != cfg.blocks {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficient blocks, got {}",
                cfg.blocks,
                coeffs.len()
            )));
        }
        for (l, c) in coeffs.iter().enumerate() {
            if c.dim() != (cfg.pilot_len, cfg.jammer_antennas) {
                return Err(Error::DimensionMismatch(format!(
                    "block {l}: coefficients are {:?}, expected ({}, {})",
                    c.dim(),
                    cfg.pilot_len,
                    cfg.jammer_antennas
                )));
            }
            let total = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let target = cfg.jammer_antennas as f64;
            if (total - target).abs() > POWER_REL_TOL * target {
                return Err(Error::InvalidArgument(format!(
                    "block {l}: total jammer power {total} violates the constraint {target}"
                )));
            }
        }
        Ok(Self { coeffs, strategy: JammerStrategy::Custom })
    }

    pub fn strategy(&self) -> JammerStrategy {
        self.strategy
    }

    pub fn block_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn block(&self, l: usize) -> ArrayView2<'_, Complex64> {
        self.coeffs[l].view()
    }

    /// `sum_j |c_ij(l)|^2`, the power the jammer puts on pilot `i`.
    pub fn pilot_power(&self, l: usize, i: usize) -> f64 {
        self.coeffs[l].row(i).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn total_power(&self, l: usize) -> f64 {
        self.coeffs[l].iter().map(|z| z.norm_sqr()).sum()
    }

    /// `sum_j c_ij(l) conj(c_i'j(l))`.
    pub fn cross_correlation(&self, l: usize, i: usize, i2: usize) -> Complex64 {
        let c = &self.coeffs[l];
        c.row(i).iter().zip(c.row(i2).iter()).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Test hooks for [`draw_block`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockOptions {
    /// Replace the receiver noise by zeros.
    pub noiseless: bool,
}

/// One coherence block: channels, noise, and the received pilot-phase matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRealization {
    /// `M_r x K`, column `i` is `g_i`.
    pub user_channels: CMatrix,
    /// `M_r x M_w`, column `j` is `g_w^(j)`.
    pub jammer_channels: CMatrix,
    /// `M_r x tau`.
    pub noise: CMatrix,
    /// `M_r x tau` received matrix `Y(l)`.
    pub received: CMatrix,
    pub jammer_present: bool,
    /// `tau x M_w` coefficients that produced this block.
    pub jammer_coeffs: CMatrix,
    pub assignment: PilotAssignment,
}

fn check_block_inputs(
    cfg: &SystemConfig,
    book: &PilotBook,
    coeffs: &ArrayView2<'_, Complex64>,
    assignment: &PilotAssignment,
) -> Result<()> {
    cfg.validate()?;
    if book.len() != cfg.pilot_len {
        return Err(Error::DimensionMismatch(format!(
            "pilot book has {} pilots, config expects {}",
            book.len(),
            cfg.pilot_len
        )));
    }
    if coeffs.dim() != (cfg.pilot_len, cfg.jammer_antennas) {
        return Err(Error::DimensionMismatch(format!(
            "jammer coefficients are {:?}, expected ({}, {})",
            coeffs.dim(),
            cfg.pilot_len,
            cfg.jammer_antennas
        )));
    }
    if assignment.pilot_count() != cfg.pilot_len || assignment.user_pilots().len() != cfg.users {
        return Err(Error::DimensionMismatch(format!(
            "pilot assignment covers {} users / {} pilots, config has {} / {}",
            assignment.user_pilots().len(),
            assignment.pilot_count(),
            cfg.users,
            cfg.pilot_len
        )));
    }
    Ok(())
}

/// Draws one block and forms
/// `Y = sum_users sqrt(tau p) g_i phi_a(i)^T + sqrt(tau q) sum_i sum_j c_ij g_w^(j) phi_i^T + N`.
///
/// With `jammer_present == false` the jammer terms are zero (the jammer
/// channels are still drawn so that the channel stream is consumed the same
/// way under both hypotheses).
pub fn draw_block<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    book: &PilotBook,
    coeffs: ArrayView2<'_, Complex64>,
    assignment: &PilotAssignment,
    jammer_present: bool,
    options: BlockOptions,
    rng: &mut R,
) -> Result<BlockRealization> {
    check_block_inputs(cfg, book, &coeffs, assignment)?;
    let m_r = cfg.bs_antennas;
    let tau = cfg.pilot_len;

    let mut user_channels = complex_normal_matrix(m_r, cfg.users, rng);
    for (mut col, beta) in user_channels.columns_mut().into_iter().zip(&cfg.user_fading) {
        col *= Complex64::from(beta.sqrt());
    }
    let mut jammer_channels = complex_normal_matrix(m_r, cfg.jammer_antennas, rng);
    jammer_channels *= Complex64::from(cfg.jammer_fading.sqrt());
    let noise = if options.noiseless {
        Array2::zeros((m_r, tau))
    } else {
        complex_normal_matrix(m_r, tau, rng)
    };

    // Column i of `along_pilot` is the M_r-vector transmitted along pilot i.
    let mut along_pilot: CMatrix = Array2::zeros((m_r, tau));
    let user_amp = Complex64::from((tau as f64 * cfg.user_power).sqrt());
    for (u, &pilot) in assignment.user_pilots().iter().enumerate() {
        let mut col = along_pilot.column_mut(pilot);
        col.scaled_add(user_amp, &user_channels.column(u));
    }
    if jammer_present {
        let jam_amp = Complex64::from((tau as f64 * cfg.jammer_power).sqrt());
        along_pilot.scaled_add(jam_amp, &jammer_channels.dot(&coeffs.t()));
    }
    // Y = A Phi^T + N
    let received = along_pilot.dot(&book.as_matrix().t()) + &noise;

    Ok(BlockRealization {
        user_channels,
        jammer_channels,
        noise,
        received,
        jammer_present,
        jammer_coeffs: coeffs.to_owned(),
        assignment: assignment.clone(),
    })
}

impl BlockRealization {
    /// Rebuilds the received matrix term by term from the stored constituents.
    pub fn reassemble(&self, cfg: &SystemConfig, book: &PilotBook) -> CMatrix {
        let m_r = self.received.nrows();
        let tau = book.len();
        let user_amp = (tau as f64 * cfg.user_power).sqrt();
        let jam_amp = (tau as f64 * cfg.jammer_power).sqrt();
        let mut y = self.noise.clone();
        for m in 0..m_r {
            for n in 0..tau {
                let mut acc = Complex64::new(0.0, 0.0);
                for (u, &i) in self.assignment.user_pilots().iter().enumerate() {
                    acc += user_amp * self.user_channels[[m, u]] * book.pilot(i)[n];
                }
                if self.jammer_present {
                    for i in 0..tau {
                        for j in 0..self.jammer_channels.ncols() {
                            acc += jam_amp
                                * self.jammer_coeffs[[i, j]]
                                * self.jammer_channels[[m, j]]
                                * book.pilot(i)[n];
                        }
                    }
                }
                y[[m, n]] += acc;
            }
        }
        y
    }
}

/// Projects `Y(l)` onto each unused pilot: column `c` is `Y conj(phi_u)` for
/// the `c`-th unused pilot `u`.
pub fn project_unused(block: &BlockRealization, book: &PilotBook, assignment: &PilotAssignment) -> Result<CMatrix> {
    if assignment.unused().is_empty() {
        return Err(Error::NoUnusedPilots { users: assignment.user_pilots().len(), pilots: assignment.pilot_count() });
    }
    if book.len() != block.received.ncols() || assignment.pilot_count() != book.len() {
        return Err(Error::DimensionMismatch(format!(
            "received matrix has {} columns, pilot book {} pilots, assignment {} pilots",
            block.received.ncols(),
            book.len(),
            assignment.pilot_count()
        )));
    }
    let tau = book.len();
    let mut selector: CMatrix = Array2::zeros((tau, assignment.unused().len()));
    for (c, &u) in assignment.unused().iter().enumerate() {
        selector.column_mut(c).assign(&book.pilot(u).mapv(|z| z.conj()));
    }
    Ok(block.received.dot(&selector))
}

/// Draws the unused-pilot projection of one block directly:
/// `y_u = sqrt(tau q) sum_j c_uj g_w^(j) + n_u`.
///
/// Equal in distribution to `draw_block` followed by `project_unused`, since
/// user terms vanish on unused pilots and the projected noise is again
/// i.i.d. `CN(0, 1)`. Skips the `M_r x tau` matrix products.
pub fn draw_unused_projection<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    coeffs: ArrayView2<'_, Complex64>,
    assignment: &PilotAssignment,
    jammer_present: bool,
    rng: &mut R,
) -> Result<CMatrix> {
    cfg.validate()?;
    if coeffs.dim() != (cfg.pilot_len, cfg.jammer_antennas) {
        return Err(Error::DimensionMismatch(format!(
            "jammer coefficients are {:?}, expected ({}, {})",
            coeffs.dim(),
            cfg.pilot_len,
            cfg.jammer_antennas
        )));
    }
    let unused = assignment.unused();
    if unused.is_empty() {
        return Err(Error::NoUnusedPilots { users: cfg.users, pilots: cfg.pilot_len });
    }
    let m_r = cfg.bs_antennas;
    let m_w = cfg.jammer_antennas;
    let amp = (cfg.pilot_len as f64 * cfg.jammer_power * cfg.jammer_fading).sqrt();
    // Scaled coefficients restricted to the unused pilots: unused x M_w.
    let weights: Vec<Complex64> =
        unused.iter().flat_map(|&u| (0..m_w).map(move |j| (u, j))).map(|(u, j)| coeffs[[u, j]] * amp).collect();

    let mut out: CMatrix = Array2::zeros((m_r, unused.len()));
    let mut h = vec![Complex64::new(0.0, 0.0); m_w];
    for mut row in out.rows_mut() {
        for hj in h.iter_mut() {
            *hj = complex_normal(rng);
        }
        for (c, y) in row.iter_mut().enumerate() {
            let mut acc = complex_normal(rng);
            if jammer_present {
                acc += weights[c * m_w..(c + 1) * m_w].iter().zip(&h).map(|(w, g)| w * g).sum::<Complex64>();
            }
            *y = acc;
        }
    }
    Ok(out)
}

/// The detector's input: `L` blocks of `M_r x (tau - K)` projections.
#[derive(Debug, Clone, PartialEq)]
pub struct UnusedPilotObservations {
    blocks: Vec<CMatrix>,
}

impl UnusedPilotObservations {
    pub fn new(blocks: Vec<CMatrix>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::InvalidArgument("observations hold no blocks".into()))?;
        let shape = first.dim();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidArgument(format!("observation blocks must be nonempty, got {shape:?}")));
        }
        if let Some((l, b)) = blocks.iter().enumerate().find(|(_, b)| b.dim() != shape) {
            return Err(Error::DimensionMismatch(format!(
                "block {l} has shape {:?}, block 0 has {shape:?}",
                b.dim()
            )));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn dims(&self) -> ObservationDims {
        let (m_r, unused) = self.blocks[0].dim();
        ObservationDims { bs_antennas: m_r, blocks: self.blocks.len(), unused }
    }

    /// Checks the shape against what a scenario produces.
    pub fn check_matches(&self, cfg: &SystemConfig) -> Result<()> {
        let got = self.dims();
        let want = cfg.dims()?;
        if got != want {
            return Err(Error::DimensionMismatch(format!(
                "observations are {got:?}, configuration expects {want:?}"
            )));
        }
        Ok(())
    }

    /// Row vectors `y~_m(l)` over all blocks and antennas.
    pub fn rows(&self) -> impl Iterator<Item = ndarray::ArrayView1<'_, Complex64>> {
        self.blocks.iter().flat_map(|b| b.rows())
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b.mapv(|z| z * factor)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn rng(seed: u64) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(seed)
    }

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            bs_antennas: 6,
            jammer_antennas: 3,
            users: 2,
            pilot_len: 5,
            blocks: 2,
            user_power: 2.0,
            jammer_power: 0.7,
            user_fading: vec![0.5, 1.5],
            jammer_fading: 1.3,
            coherence_len: 50,
        }
    }

    #[test]
    fn pilot_book_single() {
        let book = PilotBook::new(1).unwrap();
        assert_eq!(book.pilot(0)[0], Complex64::new(1.0, 0.0));
        assert!((book.pairing(0, 0) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn pilot_book_orthonormal_up_to_64() {
        for tau in 1..=64 {
            let g = PilotBook::new(tau).unwrap().gram();
            for ((i, t), z) in g.indexed_iter() {
                let want = if i == t { 1.0 } else { 0.0 };
                assert!((z - want).norm() < 1e-12, "tau={tau} ({i},{t}) = {z}");
            }
        }
    }

    #[test]
    fn pilot_book_paper_length() {
        let book = PilotBook::new(10).unwrap();
        assert_eq!(book.len(), 10);
        assert_eq!(book.pilot(3).len(), 10);
    }

    #[test]
    fn pilot_book_rejects_zero() {
        assert!(matches!(PilotBook::new(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn equal_split_four_antennas_ten_pilots() {
        let cfg = SystemConfig { jammer_antennas: 4, pilot_len: 10, ..SystemConfig::default() };
        let prof = JammerProfile::equal_split(&cfg, &mut rng(1)).unwrap();
        assert_eq!(prof.strategy(), JammerStrategy::EqualSplit);
        for l in 0..cfg.blocks {
            for i in 0..10 {
                assert!((prof.pilot_power(l, i) - 0.4).abs() < 1e-9 * 0.4);
            }
            assert!((prof.total_power(l) - 4.0).abs() < 1e-9 * 4.0);
        }
    }

    #[test]
    fn equal_split_single_antenna_single_pilot() {
        let cfg = SystemConfig {
            jammer_antennas: 1,
            pilot_len: 1,
            coherence_len: 1,
            blocks: 1,
            ..SystemConfig::default()
        }
        .with_users(0);
        let prof = JammerProfile::equal_split(&cfg, &mut rng(2)).unwrap();
        assert!((prof.block(0)[[0, 0]].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_split_uniform_cross_correlation() {
        let cfg = SystemConfig { jammer_antennas: 2, pilot_len: 4, blocks: 3, ..SystemConfig::default() }.with_users(1);
        let prof = JammerProfile::equal_split(&cfg, &mut rng(3)).unwrap();
        for l in 0..3 {
            for i in 0..4 {
                for i2 in 0..4 {
                    let r = prof.cross_correlation(l, i, i2);
                    assert!((r - Complex64::new(0.5, 0.0)).norm() < 1e-12, "({i},{i2}) -> {r}");
                }
            }
        }
    }

    #[test]
    fn custom_profile_checks_power() {
        let cfg = small_cfg();
        let good = vec![Array2::from_elem((5, 3), Complex64::new((1.0f64 / 5.0).sqrt(), 0.0)); 2];
        assert_eq!(JammerProfile::custom(&cfg, good).unwrap().strategy(), JammerStrategy::Custom);
        let bad = vec![Array2::from_elem((5, 3), Complex64::new(1.0, 0.0)); 2];
        assert!(JammerProfile::custom(&cfg, bad).is_err());
        let wrong_shape = vec![Array2::from_elem((4, 3), Complex64::new(0.5, 0.0)); 2];
        assert!(matches!(JammerProfile::custom(&cfg, wrong_shape), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        let full = SystemConfig::default().with_users(10);
        assert_eq!(full.validate(), Err(Error::NoUnusedPilots { users: 10, pilots: 10 }));
        let long_pilot = SystemConfig { coherence_len: 5, ..SystemConfig::default() };
        assert!(long_pilot.validate().is_err());
        let neg = SystemConfig { jammer_power: -1.0, ..SystemConfig::default() };
        assert!(neg.validate().is_err());
        let zero_bw = SystemConfig { jammer_fading: 0.0, ..SystemConfig::default() };
        assert!(zero_bw.validate().is_err());
        let mut short = SystemConfig::default();
        short.user_fading.pop();
        assert!(short.validate().is_err());
    }

    #[test]
    fn no_jammer_no_user_power_leaves_noise() {
        let cfg = SystemConfig { user_power: 0.0, ..small_cfg() };
        let book = PilotBook::new(5).unwrap();
        let prof = JammerProfile::equal_split(&cfg, &mut rng(4)).unwrap();
        let asg = PilotAssignment::first_k(5, 2).unwrap();
        let b = draw_block(&cfg, &book, prof.block(0), &asg, false, BlockOptions::default(), &mut rng(5)).unwrap();
        for (y, n) in b.received.iter().zip(b.noise.iter()) {
            assert!((y - n).norm() < 1e-14);
        }
    }

    #[test]
    fn received_reassembles_from_constituents() {
        let cfg = small_cfg();
        let book = PilotBook::new(5).unwrap();
        let prof = JammerProfile::equal_split(&cfg, &mut rng(6)).unwrap();
        let mut r = rng(7);
        for present in [false, true] {
            let asg = PilotAssignment::permuted(5, 2, &mut r).unwrap();
            let b = draw_block(&cfg, &book, prof.block(1), &asg, present, BlockOptions::default(), &mut r).unwrap();
            let y = b.reassemble(&cfg, &book);
            for (a, e) in b.received.iter().zip(y.iter()) {
                assert!((a - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_nulls_user_pilots() {
        let cfg = SystemConfig { user_power: 50.0, ..small_cfg() };
        let book = PilotBook::new(5).unwrap();
        let prof = JammerProfile::equal_split(&cfg, &mut rng(8)).unwrap();
        let mut r = rng(9);
        for _ in 0..20 {
            let asg = PilotAssignment::permuted(5, 2, &mut r).unwrap();
            let opts = BlockOptions { noiseless: true };
            let b = draw_block(&cfg, &book, prof.block(0), &asg, false, opts, &mut r).unwrap();
            let y = project_unused(&b, &book, &asg).unwrap();
            assert_eq!(y.dim(), (6, 3));
            assert!(y.iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn projection_of_clean_noiseless_block_is_zero() {
        let cfg = SystemConfig { user_power: 0.0, ..small_cfg() };
        let book = PilotBook::new(5).unwrap();
        let prof = JammerProfile::equal_split(&cfg, &mut rng(10)).unwrap();
        let asg = PilotAssignment::first_k(5, 2).unwrap();
        let b = draw_block(&cfg, &book, prof.block(0), &asg, false, BlockOptions { noiseless: true }, &mut rng(11)).unwrap();
        let y = project_unused(&b, &book, &asg).unwrap();
        assert!(y.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn projection_returns_noise_projection_without_jammer() {
        let cfg = small_cfg();
        let book = PilotBook::new(5).unwrap();
        let prof = JammerProfile::equal_split(&cfg, &mut rng(12)).unwrap();
        let asg = PilotAssignment::first_k(5, 2).unwrap();
        let b = draw_block(&cfg, &book, prof.block(0), &asg, false, BlockOptions::default(), &mut rng(13)).unwrap();
        let y = project_unused(&b, &book, &asg).unwrap();
        for (c, &u) in asg.unused().iter().enumerate() {
            for m in 0..6 {
                let n_proj: Complex64 = (0..5).map(|n| b.noise[[m, n]] * book.pilot(u)[n].conj()).sum();
                assert!((y[[m, c]] - n_proj).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let cfg = small_cfg();
        let book = PilotBook::new(4).unwrap();
        let prof = JammerProfile::equal_split(&cfg, &mut rng(14)).unwrap();
        let asg = PilotAssignment::first_k(5, 2).unwrap();
        let err = draw_block(&cfg, &book, prof.block(0), &asg, true, BlockOptions::default(), &mut rng(15));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        assert!(matches!(PilotAssignment::first_k(4, 4), Err(Error::NoUnusedPilots { .. })));
    }

    #[test]
    fn observations_validate_shapes() {
        assert!(UnusedPilotObservations::new(vec![]).is_err());
        let a = Array2::zeros((3, 2));
        let b = Array2::zeros((3, 1));
        assert!(matches!(UnusedPilotObservations::new(vec![a.clone(), b]), Err(Error::DimensionMismatch(_))));
        let obs = UnusedPilotObservations::new(vec![a.clone(), a]).unwrap();
        assert_eq!(obs.dims(), ObservationDims::new(3, 2, 2).unwrap());
        assert_eq!(obs.rows().count(), 6);
    }
}
