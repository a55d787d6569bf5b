use nalgebra::DMatrix;
use serde::Serialize;

use super::discretize::NodeModel;
use crate::error::{Error, Result};
use crate::fracops::{caputo_apply_rows, Grid};
use crate::model::{sample_reference, Plant, TrackingProblem};

/// Max-norm residuals of the first-order optimality system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// Q(x − r) + Aᵀλ + C D^α λ over interior nodes.
    pub costate: f64,
    /// R u + Bᵀλ over nodes 1..N.
    pub stationarity: f64,
    /// A x + B u + d − C D^α x over nodes 1..N.
    pub dynamics: f64,
}

/// Residuals of a trajectory against the problem's own plant. Nonlinear plants
/// are linearized at the trajectory itself, so the dynamics residual uses the
/// true vector field.
pub fn optimality_residuals(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    lam: &DMatrix<f64>,
    problem: &TrackingProblem,
    grid: &Grid,
) -> Result<Residuals> {
    let model = match problem.plant() {
        Plant::Linear(_) => NodeModel::from_problem(problem, grid)?,
        Plant::Nonlinear(p) => NodeModel::linearize(p.dynamics(), x, u, grid),
    };
    residuals_with_model(x, u, lam, &model, problem, grid)
}

pub fn residuals_with_model(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    lam: &DMatrix<f64>,
    model: &NodeModel,
    problem: &TrackingProblem,
    grid: &Grid,
) -> Result<Residuals> {
    let n = grid.n_steps();
    let (q, r) = (problem.state_dim(), problem.control_dim());
    if x.shape() != (q, n + 1) || lam.shape() != (q, n + 1) || u.shape() != (r, n + 1) {
        return Err(Error::input(
            "trajectory shape does not match the problem and grid",
        ));
    }
    let alpha = problem.alpha();
    let reference = sample_reference(problem.reference(), grid)?;
    let weights = problem.weights();
    let dx = caputo_apply_rows(x, alpha, grid)?;
    let dlam = caputo_apply_rows(lam, alpha, grid)?;

    let mut out = Residuals {
        costate: 0.0,
        stationarity: 0.0,
        dynamics: 0.0,
    };
    for k in 1..=n {
        let t = grid.t(k);
        let (a, b) = (&model.a[k], &model.b[k]);
        let dyn_res = a * x.column(k) + b * u.column(k) + &model.drift[k] - dx.column(k);
        out.dynamics = out.dynamics.max(dyn_res.amax());
        let stat = weights.r.at(t) * u.column(k) + b.transpose() * lam.column(k);
        out.stationarity = out.stationarity.max(stat.amax());
        if k < n {
            let co = weights.q.at(t) * (x.column(k) - reference.column(k))
                + a.transpose() * lam.column(k)
                + dlam.column(k);
            out.costate = out.costate.max(co.amax());
        }
    }
    Ok(out)
}
