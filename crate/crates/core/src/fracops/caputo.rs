//! Grünwald–Letnikov discretization of the left Caputo derivative on a
//! uniform grid.
//!
//! The derivative is applied to `f - f(0)`, which turns the
//! Riemann–Liouville form of the GL sum into the Caputo one for 0 < α ≤ 1.
//! The value at node 0 is defined as zero.

use nalgebra::DMatrix;

use super::grid::{FractionalOrder, Grid};
use crate::error::{Error, Result};

/// GL binomial weights w_0..=w_n: w_0 = 1, w_k = w_{k-1}·(1 − (α+1)/k).
pub fn gl_weights(alpha: FractionalOrder, n: usize) -> Vec<f64> {
    let a = alpha.value();
    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    for k in 1..=n {
        let prev = w[k - 1];
        w.push(prev * (1.0 - (a + 1.0) / k as f64));
    }
    w
}

/// Index one past the last nonzero weight. At α = 1 every weight beyond w_1
/// is exactly zero, so history sums can stop early without changing a bit.
pub(crate) fn effective_len(w: &[f64]) -> usize {
    w.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1)
}

/// GL Caputo derivative of one sampled function:
/// g_0 = 0, g_k = h^{-α} Σ_{j=0}^{k} w_j (f_{k-j} − f_0).
pub fn caputo_apply(f: &[f64], alpha: FractionalOrder, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(f.len(), "sampled function")?;
    let w = gl_weights(alpha, grid.n_steps());
    Ok(apply_with_weights(f, &w, grid.h().powf(-alpha.value())))
}

pub(crate) fn apply_with_weights(f: &[f64], w: &[f64], scale: f64) -> Vec<f64> {
    let n = f.len();
    let wl = effective_len(w);
    let f0 = f[0];
    let mut g = vec![0.0; n];
    for k in 1..n {
        let jmax = k.min(wl.saturating_sub(1));
        let mut acc = 0.0;
        for j in 0..=jmax {
            acc += w[j] * (f[k - j] - f0);
        }
        g[k] = scale * acc;
    }
    g
}

/// Row-wise Caputo derivative of a q×(N+1) sample array (one row per component).
pub fn caputo_apply_rows(
    samples: &DMatrix<f64>,
    alpha: FractionalOrder,
    grid: &Grid,
) -> Result<DMatrix<f64>> {
    grid.check_len(samples.ncols(), "sample array")?;
    let w = gl_weights(alpha, grid.n_steps());
    let scale = grid.h().powf(-alpha.value());
    let mut out = DMatrix::zeros(samples.nrows(), samples.ncols());
    for i in 0..samples.nrows() {
        let row: Vec<f64> = samples.row(i).iter().copied().collect();
        let g = apply_with_weights(&row, &w, scale);
        for (k, v) in g.into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok(out)
}

/// Row-wise derivative of order `order`, where order 0 means the identity.
/// Used for the C D^{1−α} terms, which degenerate when α = 1.
pub fn caputo_apply_rows_order(
    samples: &DMatrix<f64>,
    order: f64,
    grid: &Grid,
) -> Result<DMatrix<f64>> {
    if order == 0.0 {
        return Ok(samples.clone());
    }
    caputo_apply_rows(samples, FractionalOrder::new(order)?, grid)
}

/// Dense lower-triangular matrix form of [`caputo_apply`].
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: DMatrix<f64>,
    alpha: FractionalOrder,
    h: f64,
}

impl OperatorMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.entries.ncols() {
            return Err(Error::input(format!(
                "operator has {} columns, vector has {} entries",
                self.entries.ncols(),
                f.len()
            )));
        }
        let n = f.len();
        let mut g = vec![0.0; n];
        for (k, gk) in g.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, fj) in f.iter().enumerate().take(k + 1) {
                acc += self.entries[(k, j)] * fj;
            }
            *gk = acc;
        }
        Ok(g)
    }
}

/// Row k holds h^{-α} w_j at column k−j plus the −h^{-α} Σ_{j≤k} w_j
/// correction at column 0; row 0 is zero.
pub fn caputo_operator_matrix(alpha: FractionalOrder, grid: &Grid) -> OperatorMatrix {
    let n = grid.len();
    let w = gl_weights(alpha, grid.n_steps());
    let scale = grid.h().powf(-alpha.value());
    let mut m = DMatrix::zeros(n, n);
    let mut partial = 0.0;
    let mut partial_sums = Vec::with_capacity(n);
    for wj in &w {
        partial += wj;
        partial_sums.push(partial);
    }
    for k in 1..n {
        for j in 0..=k {
            m[(k, k - j)] += scale * w[j];
        }
        m[(k, 0)] -= scale * partial_sums[k];
    }
    OperatorMatrix {
        entries: m,
        alpha,
        h: grid.h(),
    }
}
