use jamdet::model::{
    draw_block, draw_unused_projection, equal_split_coefficients, project_unused, BlockOptions, CMatrix, PilotAssignment,
    PilotBook, SystemConfig,
};
use jamdet::rng::{StreamKey, StreamRole};
use num_complex::Complex64;

fn config(users: usize, jammer_power: f64) -> SystemConfig {
    SystemConfig { bs_antennas: 16, blocks: 1, jammer_power, ..SystemConfig::default() }.with_users(users)
}

fn key(seed: u64, t: u64) -> StreamKey {
    StreamKey::new(seed, t, 0, StreamRole::BlockDraw)
}

/// Accumulates `y y^H` over rows of many projected blocks.
struct RowCovariance {
    sum: Vec<Complex64>,
    n: usize,
    count: usize,
}

impl RowCovariance {
    fn new(n: usize) -> Self {
        Self { sum: vec![Complex64::new(0.0, 0.0); n * n], n, count: 0 }
    }

    fn push_block(&mut self, block: &CMatrix) {
        for row in block.rows() {
            for a in 0..self.n {
                for b in 0..self.n {
                    self.sum[a * self.n + b] += row[a] * row[b].conj();
                }
            }
            self.count += 1;
        }
    }

    fn entry(&self, a: usize, b: usize) -> Complex64 {
        self.sum[a * self.n + b] / self.count as f64
    }

    /// Checks every entry against `I + q~ 11^T` within three standard errors.
    fn assert_matches(&self, q_tilde: f64) {
        let diag = 1.0 + q_tilde;
        let se = diag / (self.count as f64).sqrt();
        for a in 0..self.n {
            for b in 0..self.n {
                let expected = if a == b { diag } else { q_tilde };
                let got = self.entry(a, b);
                assert!((got.re - expected).abs() < 3.0 * se, "C[{a},{b}].re = {} vs {expected} (se {se})", got.re);
                assert!(got.im.abs() < 3.0 * se, "C[{a},{b}].im = {} (se {se})", got.im);
            }
        }
    }
}

#[test]
fn clean_projection_entries_have_unit_variance() {
    let cfg = config(8, 0.0);
    let book = PilotBook::new(cfg.pilot_len).unwrap();
    let assignment = PilotAssignment::first_k(cfg.pilot_len, cfg.users).unwrap();
    let mut cov = RowCovariance::new(cfg.unused_pilots());
    // 16 rows x 2 entries per draw; 3200 draws gives 1.0e5 samples.
    for t in 0..3200 {
        let mut rng = key(11, t).rng();
        let coeffs = equal_split_coefficients(cfg.pilot_len, cfg.jammer_antennas, &mut rng);
        let block = draw_block(&cfg, &book, coeffs.view(), &assignment, false, BlockOptions::default(), &mut rng).unwrap();
        cov.push_block(&project_unused(&block, &book, &assignment).unwrap());
    }
    cov.assert_matches(0.0);
}

#[test]
fn jammed_projection_covariance_is_identity_plus_rank_one() {
    let cfg = config(7, 0.05);
    let q_tilde = cfg.effective_jamming_power();
    assert!((q_tilde - 0.2).abs() < 1e-12);
    let book = PilotBook::new(cfg.pilot_len).unwrap();
    let assignment = PilotAssignment::first_k(cfg.pilot_len, cfg.users).unwrap();
    let mut full = RowCovariance::new(cfg.unused_pilots());
    let mut direct = RowCovariance::new(cfg.unused_pilots());
    for t in 0..7000 {
        let mut rng = key(12, t).rng();
        let coeffs = equal_split_coefficients(cfg.pilot_len, cfg.jammer_antennas, &mut rng);
        let block = draw_block(&cfg, &book, coeffs.view(), &assignment, true, BlockOptions::default(), &mut rng).unwrap();
        full.push_block(&project_unused(&block, &book, &assignment).unwrap());
        direct.push_block(&draw_unused_projection(&cfg, coeffs.view(), &assignment, true, &mut rng).unwrap());
    }
    assert!(full.count >= 100_000);
    full.assert_matches(q_tilde);
    direct.assert_matches(q_tilde);
}

#[test]
fn noiseless_power_per_pilot_matches_jammer_budget() {
    let cfg = SystemConfig { bs_antennas: 8, blocks: 1, jammer_power: 0.3, jammer_fading: 0.5, ..SystemConfig::default() }
        .with_users(0);
    let book = PilotBook::new(cfg.pilot_len).unwrap();
    let assignment = PilotAssignment::first_k(cfg.pilot_len, 0).unwrap();
    let draws = 10_000;
    // Along each pilot: M_r q M_w beta_w, a sum of M_r terms |CN(0, q~)|^2 with variance M_r q~^2.
    let expected = cfg.bs_antennas as f64 * cfg.effective_jamming_power();
    let se = (cfg.bs_antennas as f64).sqrt() * cfg.effective_jamming_power() / (draws as f64).sqrt();
    let mut power = vec![0.0; cfg.pilot_len];
    for t in 0..draws {
        let mut rng = key(13, t).rng();
        let coeffs = equal_split_coefficients(cfg.pilot_len, cfg.jammer_antennas, &mut rng);
        let opts = BlockOptions { noiseless: true };
        let block = draw_block(&cfg, &book, coeffs.view(), &assignment, true, opts, &mut rng).unwrap();
        let along_pilots = project_unused(&block, &book, &assignment).unwrap();
        let frobenius: f64 = block.received.iter().map(|z| z.norm_sqr()).sum();
        let projected: f64 = along_pilots.iter().map(|z| z.norm_sqr()).sum();
        assert!((frobenius - projected).abs() < 1e-9 * frobenius.max(1.0));
        for (i, col) in along_pilots.columns().into_iter().enumerate() {
            power[i] += col.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    for (i, p) in power.iter().enumerate() {
        let mean = p / draws as f64;
        assert!((mean - expected).abs() < 3.0 * se, "pilot {i}: {mean} vs {expected}");
    }
}
