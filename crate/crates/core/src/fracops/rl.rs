//! Riemann–Liouville integral over the whole horizon,
//! (1/Γ(α)) ∫_0^{t_f} (t_f − t)^{α−1} f(t) dt.

use super::gamma::gamma;
use super::grid::{FractionalOrder, Grid};
use crate::error::Result;

/// Product-trapezoid weights: exact for piecewise-linear f against the
/// singular kernel. The kernel is never evaluated at t = t_f.
pub fn rl_weights(alpha1: FractionalOrder, grid: &Grid) -> Vec<f64> {
    if alpha1.is_integer() {
        return grid.trapezoid_weights();
    }
    let a = alpha1.value();
    let n = grid.n_steps();
    let nf = n as f64;
    let c = grid.h().powf(a) / gamma(a + 2.0);
    let mut w = vec![0.0; n + 1];
    w[0] = c * ((nf - 1.0).powf(a + 1.0) - (nf - 1.0 - a) * nf.powf(a));
    for (k, wk) in w.iter_mut().enumerate().take(n).skip(1) {
        let m = (n - k) as f64;
        *wk = c * ((m + 1.0).powf(a + 1.0) - 2.0 * m.powf(a + 1.0) + (m - 1.0).powf(a + 1.0));
    }
    w[n] = c;
    w
}

/// Weights for a function held constant on each interval (t_{k−1}, t_k] at
/// its right-node value: ρ_0 = 0 and ρ_k = ∫_{t_{k−1}}^{t_k} kernel.
pub fn rl_step_weights(alpha1: FractionalOrder, grid: &Grid) -> Vec<f64> {
    let n = grid.n_steps();
    let mut w = vec![0.0; n + 1];
    if alpha1.is_integer() {
        let h = grid.h();
        w.iter_mut().skip(1).for_each(|v| *v = h);
        return w;
    }
    let a = alpha1.value();
    let c = 1.0 / gamma(a + 1.0);
    let tf = grid.t_final();
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        let left = (tf - grid.t(k - 1)).max(0.0);
        let right = (tf - grid.t(k)).max(0.0);
        *wk = c * (left.powf(a) - right.powf(a));
    }
    w
}

pub fn rl_integral(f: &[f64], alpha1: FractionalOrder, grid: &Grid) -> Result<f64> {
    grid.check_len(f.len(), "integrand")?;
    Ok(rl_weights(alpha1, grid)
        .iter()
        .zip(f)
        .map(|(w, v)| w * v)
        .sum())
}
