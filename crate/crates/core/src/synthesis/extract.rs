use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracops::Grid;
use crate::model::{sample_reference, TrackingProblem};
use crate::transcribe::{discretize_with_model, NodeModel, ReducedQp, Trajectory};

/// Condition of X(t_k) above which the ridge is applied.
pub const RIDGE_TRIGGER: f64 = 1e10;
/// Relative ridge added to X Xᵀ.
pub const RIDGE: f64 = 1e-10;

/// Riccati samples together with their raw asymmetry.
#[derive(Debug, Clone)]
pub struct RiccatiSamples {
    pub p: Vec<DMatrix<f64>>,
    /// ‖P − Pᵀ‖_F / ‖P‖_F per node (0 where P vanishes).
    pub asymmetry: Vec<f64>,
    /// Condition of the ensemble state snapshot X(t_k) per node.
    pub snapshot_condition: Vec<f64>,
}

pub(crate) fn relative_asymmetry(p: &DMatrix<f64>) -> f64 {
    let norm = p.norm();
    if norm == 0.0 {
        0.0
    } else {
        (p - p.transpose()).norm() / norm
    }
}

/// P(t_k) = Λ(t_k) X(t_k)⁻¹ from q regulator solves started at e_1..e_q,
/// all sharing one factorization of the reduced QP.
pub fn riccati_from_ensemble(problem: &TrackingProblem, grid: &Grid) -> Result<RiccatiSamples> {
    riccati_from_model(problem, grid, &NodeModel::from_problem(problem, grid)?)
}

/// Same as [`riccati_from_ensemble`] for an explicit node model (the final
/// linearization of a nonlinear solve). The model's drift is ignored.
pub fn riccati_from_model(
    problem: &TrackingProblem,
    grid: &Grid,
    model: &NodeModel,
) -> Result<RiccatiSamples> {
    let q = problem.state_dim();
    let n = grid.len();
    let regulator = model.with_drift(vec![DVector::zeros(q); n]);
    let dp = discretize_with_model(problem, grid, regulator)?;
    let qp = ReducedQp::new(&dp)?;
    let zero_ref = DMatrix::zeros(q, n);

    let mut xs = Vec::with_capacity(q);
    let mut lams = Vec::with_capacity(q);
    for i in 0..q {
        let mut x0 = DVector::zeros(q);
        x0[i] = 1.0;
        let sol = qp.solve(&x0, &zero_ref, &dp.model.drift);
        xs.push(sol.x);
        lams.push(sol.lam);
    }

    let mut p = Vec::with_capacity(n);
    let mut asymmetry = Vec::with_capacity(n);
    let mut snapshot_condition = Vec::with_capacity(n);
    for k in 0..n {
        let x = DMatrix::from_fn(q, q, |r, c| xs[c][(r, k)]);
        let lam = DMatrix::from_fn(q, q, |r, c| lams[c][(r, k)]);
        let sv = x.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let cond = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !smax.is_finite() || smax <= 0.0 {
            return Err(Error::Synthesis {
                node: k,
                condition: cond,
            });
        }
        let pk = if cond <= RIDGE_TRIGGER {
            // Solve Xᵀ Pᵀ = Λᵀ.
            x.transpose()
                .lu()
                .solve(&lam.transpose())
                .map(|pt| pt.transpose())
                .ok_or(Error::Synthesis {
                    node: k,
                    condition: cond,
                })?
        } else {
            let gram = &x * x.transpose() + DMatrix::identity(q, q) * (RIDGE * smax * smax);
            let rhs = &x * lam.transpose();
            gram.cholesky()
                .map(|c| c.solve(&rhs).transpose())
                .ok_or(Error::Synthesis {
                    node: k,
                    condition: cond,
                })?
        };
        asymmetry.push(relative_asymmetry(&pk));
        snapshot_condition.push(cond);
        p.push(pk);
    }
    Ok(RiccatiSamples {
        p,
        asymmetry,
        snapshot_condition,
    })
}

/// K(t_k) = R(t_k)⁻¹ B(t_k)ᵀ P(t_k).
pub fn kalman_gain(
    p: &[DMatrix<f64>],
    problem: &TrackingProblem,
    grid: &Grid,
) -> Result<Vec<DMatrix<f64>>> {
    kalman_gain_with_model(p, &NodeModel::from_problem(problem, grid)?, problem, grid)
}

pub fn kalman_gain_with_model(
    p: &[DMatrix<f64>],
    model: &NodeModel,
    problem: &TrackingProblem,
    grid: &Grid,
) -> Result<Vec<DMatrix<f64>>> {
    grid.check_len(p.len(), "Riccati samples")?;
    let r = problem.weights().r.sample(grid);
    p.iter()
        .zip(&model.b)
        .zip(&r)
        .enumerate()
        .map(|(k, ((pk, bk), rk))| {
            let chol = rk
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Weights(format!("R is not positive definite at node {k}")))?;
            Ok(chol.solve(&(bk.transpose() * pk)))
        })
        .collect()
}

/// l = u* + K x* and z = λ* − P (x* − r) along the open-loop optimum.
pub fn feedforward(
    problem: &TrackingProblem,
    grid: &Grid,
    k: &[DMatrix<f64>],
    p: &[DMatrix<f64>],
    traj: &Trajectory,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = grid.len();
    if k.len() != n
        || p.len() != n
        || traj.x.ncols() != n
        || traj.u.ncols() != n
        || traj.lam.ncols() != n
    {
        return Err(Error::input(
            "gain samples and trajectory are on different grids",
        ));
    }
    let reference = sample_reference(problem.reference(), grid)?;
    let mut l = DMatrix::zeros(traj.u.nrows(), n);
    let mut z = DMatrix::zeros(traj.x.nrows(), n);
    for j in 0..n {
        l.set_column(j, &(traj.u.column(j) + &k[j] * traj.x.column(j)));
        z.set_column(
            j,
            &(traj.lam.column(j) - &p[j] * (traj.x.column(j) - reference.column(j))),
        );
    }
    Ok((l, z))
}
