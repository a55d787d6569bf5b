use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fracops::{caputo_apply_rows_order, Grid};
use crate::model::{
    polynomial_caputo, reference_caputo_numeric, sample_reference, ReferenceSignal, TrackingProblem,
};
use crate::transcribe::{NodeModel, Trajectory};

/// Max-norm residuals of the Riccati equation along x* and of the offset
/// equation, over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RiccatiResiduals {
    pub riccati: f64,
    pub offset: f64,
}

/// Central difference in time of a per-node sequence; one-sided at the ends.
fn time_derivative(samples: &[DMatrix<f64>], grid: &Grid, k: usize) -> DMatrix<f64> {
    let h = grid.h();
    let n = grid.n_steps();
    if k == 0 {
        (&samples[1] - &samples[0]) / h
    } else if k == n {
        (&samples[n] - &samples[n - 1]) / h
    } else {
        (&samples[k + 1] - &samples[k - 1]) / (2.0 * h)
    }
}

/// v = A r − C D^α r with A taken from the node model.
pub fn co_reference_with_model(
    problem: &TrackingProblem,
    grid: &Grid,
    model: &NodeModel,
) -> Result<DMatrix<f64>> {
    let r = sample_reference(problem.reference(), grid)?;
    let dr = match problem.reference() {
        ReferenceSignal::Polynomial(c) => polynomial_caputo(c, problem.alpha(), grid),
        other => reference_caputo_numeric(other, problem.alpha(), grid)?,
    };
    let mut v = -dr;
    for k in 0..grid.len() {
        let ar = &model.a[k] * r.column(k);
        let mut col = v.column_mut(k);
        col += ar;
    }
    Ok(v)
}

/// Evaluates
///   Ṗ x − D^{1−α}(−Q x − AᵀP x) + P D^{1−α}(A x − B R⁻¹ Bᵀ P x)
/// and
///   ż + D^{1−α}(Aᵀ z) − P D^{1−α}(B R⁻¹ Bᵀ z − v)
/// with Ṗ, ż by finite differences and D^{1−α} the Caputo derivative of order
/// 1 − α (the identity at α = 1).
pub fn riccati_residuals(
    p: &[DMatrix<f64>],
    z: &DMatrix<f64>,
    traj: &Trajectory,
    problem: &TrackingProblem,
    model: &NodeModel,
    grid: &Grid,
) -> Result<RiccatiResiduals> {
    let n = grid.len();
    let q = problem.state_dim();
    if p.len() != n || z.shape() != (q, n) || traj.x.shape() != (q, n) {
        return Err(Error::input(
            "Riccati samples and trajectory are on different grids",
        ));
    }
    let order = 1.0 - problem.alpha().value();
    let weights = problem.weights();
    let v = co_reference_with_model(problem, grid, model)?;

    let mut inner1 = DMatrix::zeros(q, n);
    let mut inner2 = DMatrix::zeros(q, n);
    let mut inner3 = DMatrix::zeros(q, n);
    let mut inner4 = DMatrix::zeros(q, n);
    for k in 0..n {
        let t = grid.t(k);
        let (a, b) = (&model.a[k], &model.b[k]);
        let rk = weights.r.at(t);
        let rinv_bt = rk
            .cholesky()
            .ok_or_else(|| Error::Weights(format!("R is not positive definite at node {k}")))?
            .solve(&b.transpose());
        let s = b * rinv_bt;
        let x = traj.x.column(k);
        let px = &p[k] * x;
        inner1.set_column(k, &(-(weights.q.at(t) * x) - a.transpose() * &px));
        inner2.set_column(k, &(a * x - &s * &px));
        inner3.set_column(k, &(a.transpose() * z.column(k)));
        inner4.set_column(k, &(&s * z.column(k) - v.column(k)));
    }
    let d1 = caputo_apply_rows_order(&inner1, order, grid)?;
    let d2 = caputo_apply_rows_order(&inner2, order, grid)?;
    let d3 = caputo_apply_rows_order(&inner3, order, grid)?;
    let d4 = caputo_apply_rows_order(&inner4, order, grid)?;

    let z_cols: Vec<DMatrix<f64>> = (0..n).map(|k| z.columns(k, 1).into_owned()).collect();
    let mut out = RiccatiResiduals {
        riccati: 0.0,
        offset: 0.0,
    };
    for k in 1..n - 1 {
        let pdot = time_derivative(p, grid, k);
        let r10 = pdot * traj.x.column(k) - d1.column(k) + &p[k] * d2.column(k);
        out.riccati = out.riccati.max(r10.amax());
        let zdot = time_derivative(&z_cols, grid, k);
        let r11 = zdot.column(0) + d3.column(k) - &p[k] * d4.column(k);
        out.offset = out.offset.max(r11.amax());
    }
    Ok(out)
}
