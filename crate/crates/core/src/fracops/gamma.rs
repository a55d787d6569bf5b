//! Gamma function via the Lanczos approximation (g = 7, nine coefficients).
//!
//! Relative accuracy is better than 1e-14 on (0, 20]; the reflection formula
//! covers arguments below one half.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
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

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (z - 1)
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Γ(x) for real x, excluding the poles at non-positive integers (which return NaN).
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    // Exact factorials keep small integer arguments bit-exact.
    if x == x.floor() && x <= 24.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// ln|Γ(x)| for x > 0; finite far beyond the range where Γ itself overflows.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_arguments_are_factorials() {
        assert_eq!(gamma(1.0), 1.0);
        assert_eq!(gamma(2.0), 1.0);
        assert_eq!(gamma(5.0), 24.0);
        assert_eq!(gamma(11.0), 3_628_800.0);
    }

    #[test]
    fn half_integer_values() {
        let sqrt_pi = PI.sqrt();
        assert!((gamma(0.5) - sqrt_pi).abs() < 1e-14 * sqrt_pi);
        assert!((gamma(1.5) - 0.5 * sqrt_pi).abs() < 1e-14);
        assert!((gamma(2.5) - 0.75 * sqrt_pi).abs() < 1e-14);
    }

    #[test]
    fn poles_are_nan() {
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-3.0).is_nan());
    }

    #[test]
    fn log_gamma_matches_gamma() {
        for &x in &[0.1, 0.7, 1.3, 4.2, 9.9, 17.5] {
            assert!((ln_gamma(x) - gamma(x).ln()).abs() < 1e-12, "x={x}");
        }
        // 170! overflows only a little past here; ln stays finite.
        assert!(ln_gamma(500.0).is_finite());
    }
}
