use jamdet::analysis::{
    self, inverse_regularized_lower_gamma, q_function, regularized_lower_gamma, regularized_upper_gamma, FormulaVariant,
};
use jamdet::detector::{
    glrt_log_statistic, j_function, j_inverse, ml_estimate, mu_prime_from_mu, sum_row_projections, MlEstimate,
};
use jamdet::model::{ObservationDims, SystemConfig, UnusedPilotObservations};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

/// Observations of shape `L x M_r x n` with arbitrary entries.
fn observations() -> impl Strategy<Value = UnusedPilotObservations> {
    (1usize..4, 1usize..5, 1usize..5).prop_flat_map(|(l, m_r, n)| {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), l * m_r * n).prop_map(move |vals| {
            let blocks = vals
                .chunks(m_r * n)
                .map(|c| Array2::from_shape_fn((m_r, n), |(i, j)| Complex64::new(c[i * n + j].0, c[i * n + j].1)))
                .collect();
            UnusedPilotObservations::new(blocks).unwrap()
        })
    })
}

fn system_for(obs: &UnusedPilotObservations) -> SystemConfig {
    let dims = obs.dims();
    let pilot_len = dims.unused() + 1;
    SystemConfig { bs_antennas: dims.bs_antennas(), blocks: dims.blocks(), pilot_len, ..SystemConfig::default() }
        .with_users(1)
}

fn dims_strategy() -> impl Strategy<Value = ObservationDims> {
    (1usize..300, 1usize..12, 1usize..8).prop_map(|(m, l, n)| ObservationDims::new(m, l, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn j_is_increasing(a in 0.0..50.0f64, b in 0.0..50.0f64) {
        prop_assume!(a < b);
        prop_assert!(j_function(a) < j_function(b));
    }

    #[test]
    fn j_inverse_round_trips(y in 0.0..10.0f64) {
        let x = j_inverse(y).unwrap();
        prop_assert!((j_function(x) - y).abs() <= 1e-10);
    }

    #[test]
    fn mu_prime_increases_with_mu(ln_mu in 0.0..40.0f64, step in 0.01..5.0f64, dims in dims_strategy()) {
        let lo = mu_prime_from_mu(ln_mu.exp(), &dims).unwrap();
        let hi = mu_prime_from_mu((ln_mu + step).exp(), &dims).unwrap();
        prop_assert!(lo >= 0.0 && lo < hi);
    }

    #[test]
    fn estimate_ignores_common_phase(obs in observations(), phase in 0.0..std::f64::consts::TAU) {
        let rotated = obs.scaled(Complex64::from_polar(1.0, phase));
        let (a, b) = (sum_row_projections(&obs), sum_row_projections(&rotated));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn clipping_keeps_nonnegative_part(obs in observations()) {
        let est = ml_estimate(&obs, &system_for(&obs)).unwrap();
        prop_assert_eq!(est.clipped, est.raw.max(0.0));
        prop_assert!(est.raw >= -1.0 / obs.dims().unused() as f64);
    }

    #[test]
    fn glrt_and_estimate_tests_agree(obs in observations(), ln_mu in 0.0..30.0f64) {
        let cfg = system_for(&obs);
        let dims = obs.dims();
        let est = ml_estimate(&obs, &cfg).unwrap();
        let stat = glrt_log_statistic(&obs, est.clipped, &cfg).unwrap();
        let mu_prime = mu_prime_from_mu(ln_mu.exp(), &dims).unwrap();
        // Skip draws within rounding distance of the boundary.
        prop_assume!((stat - ln_mu).abs() > 1e-9 * ln_mu.max(1.0));
        prop_assert_eq!(stat > ln_mu, est.clipped > mu_prime);
    }

    #[test]
    fn estimate_scales_with_energy(obs in observations(), gain in 0.1..10.0f64) {
        let dims = obs.dims();
        let s = sum_row_projections(&obs);
        let scaled = MlEstimate::from_sum(s * gain, &dims);
        let base = MlEstimate::from_sum(s, &dims);
        prop_assert!(gain <= 1.0 || scaled.raw >= base.raw);
        prop_assert!(gain >= 1.0 || scaled.raw <= base.raw);
    }

    #[test]
    fn pfa_decreases_in_threshold(dims in dims_strategy(), a in 0.0..0.5f64, b in 0.0..0.5f64) {
        prop_assume!(a < b);
        for variant in [FormulaVariant::PaperExact, FormulaVariant::ComplexConsistent] {
            let (pa, pb) = (analysis::pfa_exact(a, &dims, variant), analysis::pfa_exact(b, &dims, variant));
            prop_assert!((0.0..=1.0).contains(&pa) && (0.0..=1.0).contains(&pb));
            prop_assert!(pb <= pa);
        }
    }

    #[test]
    fn pc_increases_in_jamming_power(dims in dims_strategy(), mu in 0.0..0.3f64, q1 in 0.0..2.0f64, q2 in 0.0..2.0f64) {
        prop_assume!(q1 < q2);
        for variant in [FormulaVariant::PaperExact, FormulaVariant::ComplexConsistent] {
            let p1 = analysis::pc_exact(mu, q1, &dims, variant).unwrap();
            let p2 = analysis::pc_exact(mu, q2, &dims, variant).unwrap();
            prop_assert!(p1 <= p2 && (0.0..=1.0).contains(&p2));
        }
        prop_assert!(analysis::pc_asymptotic(mu, q1, &dims).unwrap() <= analysis::pc_asymptotic(mu, q2, &dims).unwrap());
    }

    #[test]
    fn pc_reduces_to_pfa_without_jamming(dims in dims_strategy(), mu in -0.2..0.5f64) {
        let variant = FormulaVariant::ComplexConsistent;
        prop_assert_eq!(analysis::pc_exact(mu, 0.0, &dims, variant).unwrap(), analysis::pfa_exact(mu, &dims, variant));
        let diff = analysis::pc_asymptotic(mu, 0.0, &dims).unwrap() - analysis::pfa_asymptotic(mu, &dims);
        prop_assert!(diff.abs() <= 1e-15);
    }

    #[test]
    fn q_function_is_antisymmetric(x in -8.0..8.0f64) {
        prop_assert!((q_function(x) + q_function(-x) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn incomplete_gamma_halves_sum_to_one(a in 0.05..3000.0f64, ratio in 0.0..3.0f64) {
        let x = a * ratio;
        let p = regularized_lower_gamma(a, x).unwrap();
        let q = regularized_upper_gamma(a, x).unwrap();
        prop_assert!((p + q - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn inverse_gamma_round_trips(a in 0.5..5000.0f64, p in 1e-6..0.999_999f64) {
        let x = inverse_regularized_lower_gamma(a, p).unwrap();
        prop_assert!((regularized_lower_gamma(a, x).unwrap() - p).abs() <= 1e-9);
    }
}
