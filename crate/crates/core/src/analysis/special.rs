//! Special functions behind the detection probabilities.
//!
//! The regularized incomplete gamma pair is evaluated with the power series
//! for `x < a + 1` and a modified-Lentz continued fraction otherwise; each
//! branch computes the tail it is accurate for and the other one by
//! complement. The Gaussian tail `Q` is expressed through the same pair
//! (`Q(x) = ½·Γ(½, x²/2)/Γ(½)`), so a single numerical core backs every
//! closed-form probability in the crate.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const MAX_ITER: usize = 100_000;
const REL_EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln(1 + t) - t` without cancellation near zero.
pub(crate) fn log1p_minus(t: f64) -> f64 {
    if t.abs() < 0.05 {
        // -t²/2 + t³/3 - t⁴/4 + ...
        let mut term = t;
        let mut sum = 0.0;
        for k in 2..40 {
            term *= -t;
            let add = term / k as f64;
            sum += add;
            if add.abs() <= sum.abs() * 1e-17 {
                break;
            }
        }
        sum
    } else {
        t.ln_1p() - t
    }
}

/// Stirling remainder `lnΓ(a) - [(a-½)ln a - a + ½ln 2π]` for `a >= 10`.
fn stirling_remainder(a: f64) -> f64 {
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// `ln(x^a e^{-x} / Γ(a))`, the common prefactor of both tails.
///
/// For large `a` the naive form loses ~`a·ln x·ε` to cancellation, so it is
/// rewritten around `x = a` through `log1p_minus`.
fn log_prefactor(a: f64, x: f64) -> f64 {
    if a >= 10.0 {
        let t = (x - a) / a;
        a * log1p_minus(t) + 0.5 * a.ln() - 0.5 * (2.0 * PI).ln() - stirling_remainder(a)
    } else {
        a * x.ln() - x - ln_gamma(a)
    }
}

fn check_domain(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma shape must be positive, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Lower regularized gamma by its power series alone (valid for every `x >= 0`,
/// fast for `x < a + 1`).
pub fn lower_gamma_series(a: f64, x: f64) -> Result<f64> {
    check_domain(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * REL_EPS {
            return Ok((sum.ln() + log_prefactor(a, x)).exp().min(1.0));
        }
    }
    Err(Error::NoConvergence("incomplete gamma series"))
}

/// Upper regularized gamma by its continued fraction alone (valid for `x > 0`,
/// fast for `x > a + 1`).
pub fn upper_gamma_cf(a: f64, x: f64) -> Result<f64> {
    check_domain(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < REL_EPS {
            return Ok((h.ln() + log_prefactor(a, x)).exp().min(1.0));
        }
    }
    Err(Error::NoConvergence("incomplete gamma continued fraction"))
}

/// Both tails `(P(a,x), Q(a,x))`, each computed on the branch where it is accurate.
pub fn regularized_gamma_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    check_domain(a, x)?;
    if x == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    if x < a + 1.0 {
        let p = lower_gamma_series(a, x)?;
        Ok((p, 1.0 - p))
    } else {
        let q = upper_gamma_cf(a, x)?;
        Ok((1.0 - q, q))
    }
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x)/Γ(a)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    regularized_gamma_pair(a, x).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_upper_gamma(a: f64, x: f64) -> Result<f64> {
    regularized_gamma_pair(a, x).map(|(_, q)| q)
}

/// Which tail a gamma inversion target refers to.
#[derive(Clone, Copy)]
enum Tail {
    Lower,
    Upper,
}

/// Solves `tail(a, x) = target` for `x` by Newton steps inside a shrinking
/// bracket, falling back to bisection when a step leaves it.
fn invert_gamma(a: f64, target: f64, tail: Tail) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma shape must be positive, got {a}")));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidArgument(format!("gamma tail probability must lie in [0, 1], got {target}")));
    }
    // Normalize to the smaller tail: solve lower(x) = p with p <= 0.5 or upper(x) = q with q < 0.5.
    let (tail, target) = match (tail, target > 0.5) {
        (Tail::Lower, true) => (Tail::Upper, 1.0 - target),
        (Tail::Upper, true) => (Tail::Lower, 1.0 - target),
        (t, false) => (t, target),
    };
    match (tail, target) {
        (Tail::Lower, t) if t == 0.0 => return Ok(0.0),
        (Tail::Upper, t) if t == 0.0 => return Ok(f64::INFINITY),
        _ => {}
    }

    // f(x) is increasing in x in both cases.
    let f = |x: f64| -> Result<f64> {
        let (p, q) = regularized_gamma_pair(a, x)?;
        Ok(match tail {
            Tail::Lower => p - target,
            Tail::Upper => target - q,
        })
    };

    // Wilson-Hilferty starting point.
    let z = {
        let upper_prob = match tail {
            Tail::Lower => 1.0 - target,
            Tail::Upper => target,
        };
        rough_normal_upper_quantile(upper_prob)
    };
    let wh = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * a.sqrt());
    let mut x = if wh > 0.0 { a * wh * wh * wh } else { a.max(1e-3) * 0.5 };
    if !(x > 0.0) || !x.is_finite() {
        x = a;
    }

    let mut lo = 0.0_f64;
    let mut hi = a.max(1.0);
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoConvergence("gamma inverse bracket"));
        }
    }
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }

    let ln_gamma_a = ln_gamma(a);
    for _ in 0..500 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((a - 1.0) * x.ln() - x - ln_gamma_a).exp();
        let mut next = if density > 0.0 && density.is_finite() { x - fx / density } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence("gamma inverse"))
}

/// Inverse of `P(a, ·)`: the `x` with `P(a, x) = p`.
pub fn inverse_regularized_lower_gamma(a: f64, p: f64) -> Result<f64> {
    invert_gamma(a, p, Tail::Lower)
}

/// Inverse of `Q(a, ·)`: the `x` with `Q(a, x) = q`.
pub fn inverse_regularized_upper_gamma(a: f64, q: f64) -> Result<f64> {
    invert_gamma(a, q, Tail::Upper)
}

/// Standard normal upper tail `Q(x) = Pr(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 1.0 - q_function(-x);
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    // x >= 0 keeps the gamma arguments in domain.
    0.5 * regularized_upper_gamma(0.5, 0.5 * x * x).expect("domain checked")
}

/// Inverse of [`q_function`] on `(0, 1)`.
pub fn q_function_inverse(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::InvalidArgument(format!("Q-function inverse needs y in (0, 1), got {y}")));
    }
    if y == 0.5 {
        return Ok(0.0);
    }
    if y > 0.5 {
        return q_function_inverse(1.0 - y).map(|x| -x);
    }
    // Q(x) = ½ Q_γ(½, x²/2) for x >= 0
    let half_sq = inverse_regularized_upper_gamma(0.5, 2.0 * y)?;
    let mut x = (2.0 * half_sq).sqrt();
    // One Newton polish directly on Q.
    let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    if density > 0.0 {
        x += (q_function(x) - y) / density;
    }
    Ok(x)
}

/// Coarse normal quantile (|error| < 5e-3) used only to seed iterations.
fn rough_normal_upper_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return 40.0;
    }
    if p >= 1.0 {
        return -40.0;
    }
    if p > 0.5 {
        return -rough_normal_upper_quantile(1.0 - p);
    }
    // Abramowitz & Stegun 26.2.23
    let t = (-2.0 * p.ln()).sqrt();
    t - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
        / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for n in 1..30 {
            if n > 1 {
                fact *= (n - 1) as f64;
            }
            let got = ln_gamma(n as f64);
            assert!((got - fact.ln()).abs() <= 1e-12 * fact.ln().abs().max(1.0), "n={n}");
        }
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn log1p_minus_is_continuous_at_switch() {
        for t in [0.049_999_f64, 0.05, 0.050_001, -0.049_999, -0.05] {
            let direct = t.ln_1p() - t;
            assert!((log1p_minus(t) - direct).abs() < 1e-15);
        }
        let want = -0.5e-16 + 1e-24 / 3.0;
        assert!(((log1p_minus(1e-8) - want) / want).abs() < 1e-14);
    }

    #[test]
    fn p_of_one_is_exponential_cdf() {
        let got = regularized_lower_gamma(1.0, 1.0).unwrap();
        assert!((got - 0.632_120_558_828_557_7).abs() < 1e-12);
    }

    #[test]
    fn p_at_zero_is_zero() {
        for a in [0.3, 1.0, 7.5, 1000.0] {
            assert_eq!(regularized_lower_gamma(a, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn series_and_fraction_agree_at_five_five() {
        let p = lower_gamma_series(5.0, 5.0).unwrap();
        let q = upper_gamma_cf(5.0, 5.0).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12, "p={p} q={q}");
        // Poisson identity for integer shape: Q(5,5) = e^-5 Σ_{k<5} 5^k/k!
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..5 {
            term *= 5.0 / k as f64;
            sum += term;
        }
        assert!((q - (-5.0_f64).exp() * sum).abs() < 1e-14);
    }

    #[test]
    fn large_shape_values() {
        // Reference values from 30-digit quadrature.
        for &(a, x, want) in &[(1000.0, 950.0, 0.055_054_686_230_738), (4000.0, 4000.0, 0.502_102_613_353_679)] {
            let got = regularized_lower_gamma(a, x).unwrap();
            assert!((got - want).abs() < 1e-12, "a={a} x={x} got={got}");
        }
    }

    #[test]
    fn large_shape_pair_is_complementary() {
        for &(a, x) in &[(1000.0, 1060.0), (2000.0, 2100.0), (4000.0, 4200.0)] {
            let p = lower_gamma_series(a, x).unwrap();
            let q = upper_gamma_cf(a, x).unwrap();
            assert!((p + q - 1.0).abs() < 1e-11, "a={a} x={x} p={p} q={q}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(regularized_lower_gamma(0.0, 1.0).is_err());
        assert!(regularized_lower_gamma(1.0, -1.0).is_err());
        assert!(inverse_regularized_lower_gamma(1.0, 1.5).is_err());
        assert!(q_function_inverse(0.0).is_err());
        assert!(q_function_inverse(1.0).is_err());
    }

    #[test]
    fn q_function_basics() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((q_function(-2.0) - 0.977_249_868_051_820_8).abs() < 1e-15);
    }

    #[test]
    fn gamma_inverse_round_trips() {
        for &a in &[0.5, 1.0, 3.0, 20.0, 1000.0, 4000.0] {
            for &p in &[1e-10, 1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9] {
                let x = inverse_regularized_lower_gamma(a, p).unwrap();
                let back = regularized_lower_gamma(a, x).unwrap();
                assert!((back - p).abs() < 1e-10, "a={a} p={p} back={back}");
                let xq = inverse_regularized_upper_gamma(a, p).unwrap();
                let backq = regularized_upper_gamma(a, xq).unwrap();
                assert!((backq - p).abs() < 1e-10, "a={a} q={p} back={backq}");
            }
        }
    }
}
