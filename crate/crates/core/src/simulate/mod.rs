//! Time-domain simulation of Caputo dynamics on a uniform grid.
//!
//! Each step solves h^{−α}[w_0 (x_k − x_0) + Σ_{j≥1} w_j (x_{k−j} − x_0)] =
//! f(x_k, u_k, t_k) for x_k: a q×q linear solve for linear plants, a
//! fixed-point iteration otherwise. The full history is kept.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracops::{effective_len, gl_weights, FractionalOrder, Grid};
use crate::model::{Dynamics, Plant};
use crate::synthesis::GainSchedule;

/// Fixed-point tolerance, relative to max(1, ‖x_k‖∞).
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingMetrics {
    /// ∫ ‖x − r‖² dt.
    pub ise: f64,
    /// ∫ (x_i − r_i)² dt per component.
    pub ise_components: Vec<f64>,
    pub max_err: f64,
    /// ∫ uᵀu dt.
    pub control_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    /// Metrics against the zero reference until [`SimulationResult::retarget`].
    pub metrics: TrackingMetrics,
}

impl SimulationResult {
    pub fn retarget(mut self, reference: &DMatrix<f64>, grid: &Grid) -> Result<Self> {
        self.metrics = tracking_metrics(&self.x, &self.u, reference, grid)?;
        Ok(self)
    }
}

/// Trapezoid-rule tracking metrics.
pub fn tracking_metrics(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    grid: &Grid,
) -> Result<TrackingMetrics> {
    grid.check_len(x.ncols(), "state samples")?;
    grid.check_len(u.ncols(), "control samples")?;
    if reference.shape() != x.shape() {
        return Err(Error::input(format!(
            "reference shape {:?} does not match state shape {:?}",
            reference.shape(),
            x.shape()
        )));
    }
    let e = x - reference;
    let ise_components: Vec<f64> = (0..e.nrows())
        .map(|i| {
            let sq: Vec<f64> = e.row(i).iter().map(|v| v * v).collect();
            grid.trapezoid(&sq)
        })
        .collect();
    let energy: Vec<f64> = u.column_iter().map(|c| c.norm_squared()).collect();
    Ok(TrackingMetrics {
        ise: ise_components.iter().sum(),
        ise_components,
        max_err: e.amax(),
        control_energy: grid.trapezoid(&energy),
    })
}

enum Law<'a> {
    Open(&'a DMatrix<f64>),
    Closed(&'a GainSchedule),
}

pub fn simulate_open_loop(
    plant: &Plant,
    u: &DMatrix<f64>,
    x0: &DVector<f64>,
    alpha: FractionalOrder,
    grid: &Grid,
) -> Result<SimulationResult> {
    if u.shape() != (plant.control_dim(), grid.len()) {
        return Err(Error::input(format!(
            "control samples have shape {:?}, expected ({}, {})",
            u.shape(),
            plant.control_dim(),
            grid.len()
        )));
    }
    simulate(plant, Law::Open(u), x0, alpha, grid)
}

/// Feedback rollout u_k = −K_k x_k + l_k, implicit in both the dynamics and
/// the feedback.
pub fn simulate_closed_loop(
    plant: &Plant,
    gains: &GainSchedule,
    x0: &DVector<f64>,
    grid: &Grid,
) -> Result<SimulationResult> {
    if gains.grid != *grid {
        return Err(Error::input(
            "gain schedule was synthesized on a different grid",
        ));
    }
    if gains.state_dim() != plant.state_dim() || gains.control_dim() != plant.control_dim() {
        return Err(Error::input(
            "gain schedule dimensions do not match the plant",
        ));
    }
    simulate(plant, Law::Closed(gains), x0, gains.alpha, grid)
}

fn simulate(
    plant: &Plant,
    law: Law,
    x0: &DVector<f64>,
    alpha: FractionalOrder,
    grid: &Grid,
) -> Result<SimulationResult> {
    let q = plant.state_dim();
    let r = plant.control_dim();
    if x0.len() != q {
        return Err(Error::input(format!(
            "initial state has length {}, expected {q}",
            x0.len()
        )));
    }
    let n = grid.n_steps();
    let w = gl_weights(alpha, n);
    let len = effective_len(&w);
    let s = grid.h().powf(-alpha.value());
    let sw0 = s * w[0];

    let mut x = DMatrix::zeros(q, n + 1);
    let mut u = DMatrix::zeros(r, n + 1);
    x.set_column(0, x0);
    let u0 = match law {
        Law::Open(us) => us.column(0).into_owned(),
        Law::Closed(g) => g.control(0, x0),
    };
    u.set_column(0, &u0);

    for k in 1..=n {
        let t = grid.t(k);
        // Known part h^{−α}[w_0 x_0 − Σ_{j≥1} w_j (x_{k−j} − x_0)].
        let mut hist = DVector::zeros(q);
        for j in 1..=k.min(len.saturating_sub(1)) {
            hist += (x.column(k - j) - x0) * w[j];
        }
        let known = x0 * sw0 - hist * s;

        let (xk, uk) = match plant {
            Plant::Linear(p) => {
                let a = p.a.at(t);
                let b = p.b.at(t);
                let mut m = DMatrix::identity(q, q) * sw0 - a;
                let rhs = match law {
                    Law::Open(us) => &known + &b * us.column(k),
                    Law::Closed(g) => {
                        m += &b * &g.k[k];
                        &known + &b * g.l.column(k)
                    }
                };
                let xk = m.lu().solve(&rhs).ok_or_else(|| Error::Stepping {
                    node: k,
                    message: "implicit step matrix is singular".into(),
                })?;
                let uk = match law {
                    Law::Open(us) => us.column(k).into_owned(),
                    Law::Closed(g) => g.control(k, &xk),
                };
                (xk, uk)
            }
            Plant::Nonlinear(p) => {
                let f = p.dynamics();
                let control = |xk: &DVector<f64>| match law {
                    Law::Open(us) => us.column(k).into_owned(),
                    Law::Closed(g) => g.control(k, xk),
                };
                let seed = x.column(k - 1).into_owned();
                let xk = match fixed_point(f, &known, sw0, t, &seed, &control) {
                    Some(xk) => xk,
                    None => {
                        log::debug!(
                            "fixed-point iteration stalled at node {k}; switching to Newton"
                        );
                        let feedback = match law {
                            Law::Open(_) => None,
                            Law::Closed(g) => Some(&g.k[k]),
                        };
                        newton(f, &known, sw0, t, &seed, &control, feedback).ok_or_else(|| Error::Stepping {
                            node: k,
                            message: format!(
                                "neither fixed-point ({FIXED_POINT_MAX_ITER} passes) nor Newton iteration converged"
                            ),
                        })?
                    }
                };
                let uk = control(&xk);
                (xk, uk)
            }
        };
        x.set_column(k, &xk);
        u.set_column(k, &uk);
    }
    let zero = DMatrix::zeros(q, n + 1);
    let metrics = tracking_metrics(&x, &u, &zero, grid)?;
    Ok(SimulationResult { x, u, metrics })
}

fn converged(change: f64, x: &DVector<f64>) -> bool {
    change <= FIXED_POINT_TOL * x.amax().max(1.0)
}

/// x ← (known + f(x, u(x), t)) / (h^{−α} w_0).
fn fixed_point(
    f: &dyn Dynamics,
    known: &DVector<f64>,
    sw0: f64,
    t: f64,
    seed: &DVector<f64>,
    control: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Option<DVector<f64>> {
    let mut xk = seed.clone();
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = (known + f.f(&xk, &control(&xk), t)) / sw0;
        let change = (&next - &xk).amax();
        xk = next;
        if !xk.iter().all(|v| v.is_finite()) {
            return None;
        }
        if converged(change, &xk) {
            return Some(xk);
        }
    }
    None
}

/// Newton on h^{−α} w_0 x − f(x, u(x), t) − known = 0, used when strong
/// feedback makes the fixed-point map expansive.
fn newton(
    f: &dyn Dynamics,
    known: &DVector<f64>,
    sw0: f64,
    t: f64,
    seed: &DVector<f64>,
    control: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    feedback: Option<&DMatrix<f64>>,
) -> Option<DVector<f64>> {
    let q = seed.len();
    let mut xk = seed.clone();
    for _ in 0..FIXED_POINT_MAX_ITER {
        let u = control(&xk);
        let residual = &xk * sw0 - f.f(&xk, &u, t) - known;
        let mut jac = DMatrix::identity(q, q) * sw0 - f.jacobian_x(&xk, &u, t);
        if let Some(k) = feedback {
            jac += f.jacobian_u(&xk, &u, t) * k;
        }
        let step = jac.lu().solve(&residual)?;
        xk -= &step;
        if !xk.iter().all(|v| v.is_finite()) {
            return None;
        }
        if converged(step.amax(), &xk) {
            return Some(xk);
        }
    }
    None
}
