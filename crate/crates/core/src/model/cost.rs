use nalgebra::DMatrix;

use super::plant::Plant;
use super::problem::TrackingProblem;
use super::reference::{
    polynomial_caputo, reference_caputo_numeric, sample_reference, ReferenceSignal,
};
use crate::error::{Error, Result};
use crate::fracops::{rl_step_weights, rl_weights, Grid};

/// Node weights of the running cost.
///
/// State terms use the trapezoid rule (or its product form against the
/// Riemann–Liouville kernel). Control terms treat u as constant on each
/// interval (t_{k−1}, t_k] at its right-node value, matching the implicit
/// collocation of the dynamics: u_0 never influences the discretized state,
/// so it carries no weight either.
#[derive(Debug, Clone, PartialEq)]
pub struct CostQuadrature {
    pub state: Vec<f64>,
    pub control: Vec<f64>,
}

impl CostQuadrature {
    pub fn new(problem: &TrackingProblem, grid: &Grid) -> Self {
        let order = problem.weights().cost_order;
        CostQuadrature {
            state: rl_weights(order, grid),
            control: rl_step_weights(order, grid),
        }
    }
}

/// J = ½ e_Nᵀ T e_N + ½ Σ_k (ω_k e_kᵀ Q_k e_k + ρ_k u_kᵀ R_k u_k), e = x − r.
pub fn evaluate_cost(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    problem: &TrackingProblem,
    grid: &Grid,
) -> Result<f64> {
    let (q, r) = (problem.state_dim(), problem.control_dim());
    if x.shape() != (q, grid.len()) || u.shape() != (r, grid.len()) {
        return Err(Error::input(format!(
            "trajectory shapes {:?}/{:?} do not match ({q}, {n})/({r}, {n})",
            x.shape(),
            u.shape(),
            n = grid.len()
        )));
    }
    let reference = sample_reference(problem.reference(), grid)?;
    let quad = CostQuadrature::new(problem, grid);
    let w = problem.weights();
    let mut running = 0.0;
    for k in 0..grid.len() {
        let t = grid.t(k);
        let e = x.column(k) - reference.column(k);
        if quad.state[k] != 0.0 {
            running += quad.state[k] * (e.transpose() * w.q.at(t) * &e)[(0, 0)];
        }
        if quad.control[k] != 0.0 {
            let uk = u.column(k);
            running += quad.control[k] * (uk.transpose() * w.r.at(t) * uk)[(0, 0)];
        }
    }
    let n = grid.n_steps();
    let e_n = x.column(n) - reference.column(n);
    let terminal = (e_n.transpose() * &w.terminal * &e_n)[(0, 0)];
    Ok(0.5 * terminal + 0.5 * running)
}

/// Co-reference v(t) = A(t) r(t) − C D^α r(t), the drift of the error
/// dynamics C D^α (x − r) = A (x − r) + B u + v.
///
/// Polynomial references use the exact monomial derivative; everything else
/// goes through the GL kernel.
pub fn co_reference(problem: &TrackingProblem, grid: &Grid) -> Result<DMatrix<f64>> {
    let dr = match problem.reference() {
        ReferenceSignal::Polynomial(c) => polynomial_caputo(c, problem.alpha(), grid),
        other => reference_caputo_numeric(other, problem.alpha(), grid)?,
    };
    co_reference_from(problem, grid, dr)
}

/// Co-reference with the Caputo term always taken from the GL kernel, which
/// makes the coordinate shift exact at the discrete level.
pub fn co_reference_numeric(problem: &TrackingProblem, grid: &Grid) -> Result<DMatrix<f64>> {
    let dr = reference_caputo_numeric(problem.reference(), problem.alpha(), grid)?;
    co_reference_from(problem, grid, dr)
}

fn co_reference_from(
    problem: &TrackingProblem,
    grid: &Grid,
    dr: DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let plant = match problem.plant() {
        Plant::Linear(p) => p,
        Plant::Nonlinear(_) => {
            return Err(Error::Unsupported(
                "co-reference requires a linear plant".into(),
            ));
        }
    };
    let r = sample_reference(problem.reference(), grid)?;
    let mut v = -dr;
    if problem.reference().is_zero() {
        return Ok(v);
    }
    for k in 0..grid.len() {
        let ar = plant.a.at(grid.t(k)) * r.column(k);
        let mut col = v.column_mut(k);
        col += ar;
    }
    Ok(v)
}
