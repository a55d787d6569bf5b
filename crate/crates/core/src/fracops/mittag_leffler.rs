use super::gamma::ln_gamma;
use super::grid::FractionalOrder;
use crate::error::{Error, Result};

/// Arguments beyond this magnitude are refused; the power series is the only
/// evaluation path.
pub const MITTAG_LEFFLER_MAX_ARG: f64 = 50.0;
const MAX_TERMS: usize = 1000;

/// One-parameter Mittag-Leffler function E_α(z) = Σ z^m / Γ(αm + 1).
///
/// Terms are formed in log space so that neither z^m nor Γ(αm + 1)
/// overflows on its own.
pub fn mittag_leffler(alpha: FractionalOrder, z: f64) -> Result<f64> {
    if !z.is_finite() || z.abs() > MITTAG_LEFFLER_MAX_ARG {
        return Err(Error::Domain(format!(
            "Mittag-Leffler series evaluated only for |z| <= {MITTAG_LEFFLER_MAX_ARG}, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let a = alpha.value();
    let ln_abs_z = z.abs().ln();
    let mut sum = 1.0;
    let mut prev = 1.0f64;
    for m in 1..=MAX_TERMS {
        let mf = m as f64;
        let mag = (mf * ln_abs_z - ln_gamma(a * mf + 1.0)).exp();
        let term = if z < 0.0 && m % 2 == 1 { -mag } else { mag };
        sum += term;
        if mag <= 1e-16 * sum.abs() && mag < prev {
            break;
        }
        prev = mag;
    }
    Ok(sum)
}
