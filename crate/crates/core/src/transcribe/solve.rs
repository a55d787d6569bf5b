use log::{debug, info};
use nalgebra::DMatrix;
use serde::Serialize;

use super::discretize::{discretize_with_model, NodeModel};
use super::reduced::ReducedQp;
use super::residuals::optimality_residuals;
use crate::error::{Error, Result};
use crate::fracops::Grid;
use crate::model::{evaluate_cost, Plant, TrackingProblem};

/// Sampled optimal trajectory; every array has N + 1 columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub lam: DMatrix<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub cost: f64,
    pub residual_costate: f64,
    pub residual_stationarity: f64,
    pub residual_dynamics: f64,
    pub kkt_relative_residual: f64,
    pub linearization_iters: usize,
    pub n_steps: usize,
    pub t_final: f64,
    pub alpha: f64,
    pub condition: f64,
}

/// Trajectory, report and the node model the final QP was built from.
#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub report: SolveReport,
    pub model: NodeModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearizationOptions {
    fn default() -> Self {
        LinearizationOptions {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &TrackingProblem,
    grid: &Grid,
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    lam: DMatrix<f64>,
    kkt: f64,
    condition: f64,
    iters: usize,
) -> Result<(Trajectory, SolveReport)> {
    let cost = evaluate_cost(&x, &u, problem, grid)?;
    let res = optimality_residuals(&x, &u, &lam, problem, grid)?;
    let report = SolveReport {
        cost,
        residual_costate: res.costate,
        residual_stationarity: res.stationarity,
        residual_dynamics: res.dynamics,
        kkt_relative_residual: kkt,
        linearization_iters: iters,
        n_steps: grid.n_steps(),
        t_final: grid.t_final(),
        alpha: problem.alpha().value(),
        condition,
    };
    Ok((Trajectory { x, u, lam, cost }, report))
}

fn check_grid(problem: &TrackingProblem, grid: &Grid) -> Result<()> {
    if (grid.t_final() - problem.t_final()).abs() > 1e-12 * problem.t_final().max(1.0) {
        return Err(Error::input(format!(
            "grid horizon {} differs from the problem horizon {}",
            grid.t_final(),
            problem.t_final()
        )));
    }
    Ok(())
}

/// Open-loop optimum of a linear problem.
pub fn solve_linear(problem: &TrackingProblem, grid: &Grid) -> Result<(Trajectory, SolveReport)> {
    check_grid(problem, grid)?;
    let model = NodeModel::from_problem(problem, grid)?;
    let dp = discretize_with_model(problem, grid, model)?;
    let qp = ReducedQp::new(&dp)?;
    let sol = qp.solve_default();
    let kkt = qp.kkt_relative_residual(&sol, &dp.reference);
    debug!(
        "linear solve: N = {}, condition {:.3e}, kkt {:.3e}",
        grid.n_steps(),
        qp.condition(),
        kkt
    );
    finish(problem, grid, sol.x, sol.u, sol.lam, kkt, qp.condition(), 0)
}

pub fn solve_nonlinear(
    problem: &TrackingProblem,
    grid: &Grid,
    opts: LinearizationOptions,
) -> Result<(Trajectory, SolveReport)> {
    let s = solve_nonlinear_detailed(problem, grid, opts)?;
    Ok((s.trajectory, s.report))
}

/// Successive linearization. Each pass linearizes f about the current
/// iterate and solves the resulting time-varying LQ problem. The step is
/// halved once the change norm has grown twice in a row.
pub fn solve_nonlinear_detailed(
    problem: &TrackingProblem,
    grid: &Grid,
    opts: LinearizationOptions,
) -> Result<Solution> {
    check_grid(problem, grid)?;
    let plant = match problem.plant() {
        Plant::Nonlinear(p) => p,
        Plant::Linear(_) => {
            return Err(Error::Unsupported(
                "solve_nonlinear expects a nonlinear plant".into(),
            ))
        }
    };
    let dynamics = plant.dynamics();
    let n = grid.len();
    let mut xb = DMatrix::from_fn(problem.state_dim(), n, |i, _| problem.x0()[i]);
    let mut ub = DMatrix::zeros(problem.control_dim(), n);
    let mut last_change = f64::INFINITY;
    let mut growth = 0;
    let mut damping = 1.0;
    for iter in 1..=opts.max_iter {
        let model = NodeModel::linearize(dynamics, &xb, &ub, grid);
        let dp = discretize_with_model(problem, grid, model.clone())?;
        let qp = ReducedQp::new(&dp)?;
        let sol = qp.solve_default();
        let change = (&sol.x - &xb).amax().max((&sol.u - &ub).amax());
        debug!("linearization pass {iter}: change {change:.3e}");
        if change <= opts.tol {
            let kkt = qp.kkt_relative_residual(&sol, &dp.reference);
            let condition = qp.condition();
            info!("successive linearization converged in {iter} passes");
            let final_model = NodeModel::linearize(dynamics, &sol.x, &sol.u, grid);
            let (trajectory, report) =
                finish(problem, grid, sol.x, sol.u, sol.lam, kkt, condition, iter)?;
            return Ok(Solution {
                trajectory,
                report,
                model: final_model,
            });
        }
        if change > last_change {
            growth += 1;
            if growth >= 2 && damping == 1.0 {
                debug!("change norm grew twice; damping steps by 0.5");
                damping = 0.5;
            }
        } else {
            growth = 0;
        }
        last_change = change;
        xb += (&sol.x - &xb) * damping;
        ub += (&sol.u - &ub) * damping;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        last_change,
    })
}

/// Dispatches on the plant kind.
pub fn solve(problem: &TrackingProblem, grid: &Grid) -> Result<Solution> {
    match problem.plant() {
        Plant::Linear(_) => {
            let (trajectory, report) = solve_linear(problem, grid)?;
            let model = NodeModel::from_problem(problem, grid)?;
            Ok(Solution {
                trajectory,
                report,
                model,
            })
        }
        Plant::Nonlinear(_) => {
            solve_nonlinear_detailed(problem, grid, LinearizationOptions::default())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_problem;
    use crate::testutil::{as_nonlinear, oscillator, Scalar};

    #[test]
    fn linear_plant_through_nonlinear_interface() {
        let p = oscillator(0.95);
        let grid = Grid::new(2.0, 150).unwrap();
        let (lin, _) = solve_linear(&p, &grid).unwrap();
        let (nl, report) =
            solve_nonlinear(&as_nonlinear(&p), &grid, LinearizationOptions::default()).unwrap();
        assert!(
            report.linearization_iters <= 2,
            "{}",
            report.linearization_iters
        );
        assert!((&lin.u - &nl.u).amax() < 1e-10);
        assert!((&lin.x - &nl.x).amax() < 1e-10);
        assert!((lin.cost - nl.cost).abs() < 1e-10 * lin.cost);
    }

    #[test]
    fn van_der_pol_converges() {
        let p = builtin_problem("vdp_q1").unwrap();
        let grid = Grid::new(5.0, 100).unwrap();
        let s = solve(&p, &grid).unwrap();
        assert!(s.report.linearization_iters > 1);
        assert!(s.report.residual_dynamics < 1e-9, "{:?}", s.report);
        assert!(s.report.residual_stationarity < 1e-9, "{:?}", s.report);
        assert!(s.report.kkt_relative_residual < 1e-9, "{:?}", s.report);
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let p = builtin_problem("vdp_q1").unwrap();
        let grid = Grid::new(5.0, 50).unwrap();
        let opts = LinearizationOptions {
            tol: 1e-8,
            max_iter: 1,
        };
        assert!(matches!(
            solve_nonlinear(&p, &grid, opts),
            Err(Error::NoConvergence { iterations: 1, .. })
        ));
    }

    #[test]
    fn wrong_plant_kind_rejected() {
        let lin = oscillator(0.95);
        let grid = Grid::new(2.0, 20).unwrap();
        assert!(solve_nonlinear(&lin, &grid, LinearizationOptions::default()).is_err());
        let vdp = builtin_problem("vdp_q1").unwrap();
        assert!(solve_linear(&vdp, &Grid::new(5.0, 20).unwrap()).is_err());
    }

    #[test]
    fn horizon_must_match() {
        let p = Scalar::default().build();
        assert!(solve_linear(&p, &Grid::new(2.0, 20).unwrap()).is_err());
    }

    #[test]
    fn report_echoes_problem() {
        let p = Scalar::default().build();
        let grid = Grid::new(1.0, 40).unwrap();
        let (traj, report) = solve_linear(&p, &grid).unwrap();
        assert_eq!(report.n_steps, 40);
        assert_eq!(report.alpha, 0.95);
        assert_eq!(report.cost, traj.cost);
        assert_eq!(report.linearization_iters, 0);
        assert_eq!(traj.x.shape(), (1, 41));
        assert_eq!(traj.x[0], 1.0);
    }
}
