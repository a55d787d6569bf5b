use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracops::{caputo_operator_matrix, Grid};
use crate::model::{evaluate_cost, sample_reference, CostQuadrature, Plant, TrackingProblem};
use crate::transcribe::Trajectory;

/// Largest (q + r)(N + 1) accepted by [`brute_force_oracle`].
pub const BRUTE_FORCE_CAP: usize = 20_000;

/// Dense reference optimum.
///
/// Assembles the full dynamics operator G (qN × qN) from the Caputo
/// operator matrix, factors it with LU, forms the condensed normal equations
/// and solves them by Cholesky. The multipliers come from an LU solve with
/// Gᵀ. Shares only the operator matrix and cost quadrature with the main
/// solver.
pub fn brute_force_oracle(problem: &TrackingProblem, grid: &Grid) -> Result<Trajectory> {
    let plant = match problem.plant() {
        Plant::Linear(p) => p,
        Plant::Nonlinear(_) => {
            return Err(Error::Unsupported(
                "brute-force oracle needs a linear plant".into(),
            ))
        }
    };
    let (q, r) = (problem.state_dim(), problem.control_dim());
    let n = grid.n_steps();
    let size = (q + r) * (n + 1);
    if size > BRUTE_FORCE_CAP {
        return Err(Error::input(format!(
            "brute-force oracle is capped at {BRUTE_FORCE_CAP} samples, problem has {size}"
        )));
    }
    let d = caputo_operator_matrix(problem.alpha(), grid);
    let d = d.entries();
    let x0 = problem.x0();
    let quad = CostQuadrature::new(problem, grid);
    let w = problem.weights();
    let reference = sample_reference(problem.reference(), grid)?;

    // G x − Bblk u = c over rows of nodes 1..N.
    let mut g = DMatrix::zeros(q * n, q * n);
    let mut bblk = DMatrix::zeros(q * n, r * n);
    let mut c = DVector::zeros(q * n);
    for k in 1..=n {
        let t = grid.t(k);
        let row = (k - 1) * q;
        for j in 1..=k {
            let col = (j - 1) * q;
            for i in 0..q {
                g[(row + i, col + i)] += d[(k, j)];
            }
        }
        let mut a_blk = g.view_mut((row, row), (q, q));
        a_blk -= plant.a.at(t);
        bblk.view_mut((row, (k - 1) * r), (q, r))
            .copy_from(&plant.b.at(t));
        for i in 0..q {
            c[row + i] = -d[(k, 0)] * x0[i];
        }
    }

    let mut wdiag = DMatrix::zeros(q * n, q * n);
    let mut rdiag = DMatrix::zeros(r * n, r * n);
    let mut rvec = DVector::zeros(q * n);
    for k in 1..=n {
        let t = grid.t(k);
        let mut wk = w.q.at(t) * quad.state[k];
        if k == n {
            wk += &w.terminal;
        }
        wdiag
            .view_mut(((k - 1) * q, (k - 1) * q), (q, q))
            .copy_from(&wk);
        rdiag
            .view_mut(((k - 1) * r, (k - 1) * r), (r, r))
            .copy_from(&(w.r.at(t) * quad.control[k]));
        rvec.rows_mut((k - 1) * q, q)
            .copy_from(&reference.column(k));
    }

    let lu = g.clone().lu();
    let s = lu.solve(&bblk).ok_or_else(|| Error::Solver {
        message: "dynamics operator is singular".into(),
        condition: f64::INFINITY,
    })?;
    let dfree = lu.solve(&c).expect("factorization already succeeded");
    let ws = &wdiag * &s;
    let hess = s.transpose() * &ws + &rdiag;
    let grad = ws.transpose() * (&dfree - &rvec);
    let chol = hess.cholesky().ok_or_else(|| Error::Solver {
        message: "condensed Hessian is not positive definite".into(),
        condition: f64::INFINITY,
    })?;
    let u = -chol.solve(&grad);
    let x = &s * &u + &dfree;
    let nu = g
        .transpose()
        .lu()
        .solve(&(&wdiag * (&x - &rvec)))
        .ok_or_else(|| Error::Solver {
            message: "transposed operator is singular".into(),
            condition: f64::INFINITY,
        })?;

    let mut xs = DMatrix::zeros(q, n + 1);
    let mut us = DMatrix::zeros(r, n + 1);
    let mut lam = DMatrix::zeros(q, n + 1);
    xs.set_column(0, x0);
    for k in 1..=n {
        xs.set_column(k, &x.rows((k - 1) * q, q));
        us.set_column(k, &u.rows((k - 1) * r, r));
        lam.set_column(k, &(nu.rows((k - 1) * q, q) / quad.control[k]));
    }
    let lam0 = lam.column(1) * 2.0 - lam.column(2);
    lam.set_column(0, &lam0);
    let u0 =
        -w.r.at(0.0)
            .cholesky()
            .expect("validated R")
            .solve(&(plant.b.at(0.0).transpose() * &lam0));
    us.set_column(0, &u0);
    let cost = evaluate_cost(&xs, &us, problem, grid)?;
    Ok(Trajectory {
        x: xs,
        u: us,
        lam,
        cost,
    })
}
