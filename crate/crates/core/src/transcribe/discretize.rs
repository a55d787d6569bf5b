use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracops::{
    caputo_operator_matrix, effective_len, gl_weights, FractionalOrder, Grid, OperatorMatrix,
};
use crate::model::{sample_reference, CostQuadrature, Dynamics, Plant, TrackingProblem};

/// Plant matrices and drift sampled at every node:
/// C D^α x_k = A_k x_k + B_k u_k + d_k.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub drift: Vec<DVector<f64>>,
}

impl NodeModel {
    pub fn from_problem(problem: &TrackingProblem, grid: &Grid) -> Result<Self> {
        match problem.plant() {
            Plant::Linear(p) => Ok(NodeModel {
                a: p.a.sample(grid),
                b: p.b.sample(grid),
                drift: vec![DVector::zeros(p.state_dim()); grid.len()],
            }),
            Plant::Nonlinear(_) => Err(Error::Unsupported(
                "nonlinear plants are discretized through successive linearization".into(),
            )),
        }
    }

    /// Linearization about (x̄, ū): A_k = ∂f/∂x, B_k = ∂f/∂u,
    /// d_k = f(x̄_k, ū_k) − A_k x̄_k − B_k ū_k.
    pub fn linearize(
        dynamics: &dyn Dynamics,
        x: &DMatrix<f64>,
        u: &DMatrix<f64>,
        grid: &Grid,
    ) -> Self {
        let n = grid.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut drift = Vec::with_capacity(n);
        for k in 0..n {
            let t = grid.t(k);
            let xk = x.column(k).into_owned();
            let uk = u.column(k).into_owned();
            let ak = dynamics.jacobian_x(&xk, &uk, t);
            let bk = dynamics.jacobian_u(&xk, &uk, t);
            let dk = dynamics.f(&xk, &uk, t) - &ak * &xk - &bk * &uk;
            a.push(ak);
            b.push(bk);
            drift.push(dk);
        }
        NodeModel { a, b, drift }
    }

    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b[0].ncols()
    }

    /// True when A_k and B_k are identical at every collocated node.
    pub fn is_time_invariant(&self) -> bool {
        self.a[1..].iter().all(|m| *m == self.a[1]) && self.b[1..].iter().all(|m| *m == self.b[1])
    }

    pub fn with_drift(&self, drift: Vec<DVector<f64>>) -> Self {
        NodeModel {
            a: self.a.clone(),
            b: self.b.clone(),
            drift,
        }
    }
}

/// Everything the QP needs, sampled on the grid.
#[derive(Debug, Clone)]
pub struct DiscretizedProblem {
    pub grid: Grid,
    pub alpha: FractionalOrder,
    pub model: NodeModel,
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
    pub terminal: DMatrix<f64>,
    pub quadrature: CostQuadrature,
    pub reference: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub(crate) gl: Vec<f64>,
    pub(crate) gl_len: usize,
    pub(crate) scale: f64,
}

pub fn discretize(problem: &TrackingProblem, grid: &Grid) -> Result<DiscretizedProblem> {
    discretize_with_model(problem, grid, NodeModel::from_problem(problem, grid)?)
}

pub fn discretize_with_model(
    problem: &TrackingProblem,
    grid: &Grid,
    model: NodeModel,
) -> Result<DiscretizedProblem> {
    if grid.n_steps() < 2 {
        return Err(Error::input("transcription needs at least two steps"));
    }
    if model.a.len() != grid.len() || model.b.len() != grid.len() || model.drift.len() != grid.len()
    {
        return Err(Error::input("node model does not match the grid"));
    }
    let gl = gl_weights(problem.alpha(), grid.n_steps());
    let gl_len = effective_len(&gl);
    let w = problem.weights();
    Ok(DiscretizedProblem {
        grid: *grid,
        alpha: problem.alpha(),
        q: w.q.sample(grid),
        r: w.r.sample(grid),
        terminal: w.terminal.clone(),
        quadrature: CostQuadrature::new(problem, grid),
        reference: sample_reference(problem.reference(), grid)?,
        x0: problem.x0().clone(),
        model,
        gl,
        gl_len,
        scale: grid.h().powf(-problem.alpha().value()),
    })
}

impl DiscretizedProblem {
    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.model.control_dim()
    }

    /// Dynamics rows: q·N (one block per collocated node).
    pub fn n_constraint_rows(&self) -> usize {
        self.state_dim() * self.grid.n_steps()
    }

    /// All state and control samples, (q + r)(N + 1); x_0 is pinned by the
    /// initial condition and u_0 does not enter the collocated dynamics.
    pub fn n_samples(&self) -> usize {
        (self.state_dim() + self.control_dim()) * self.grid.len()
    }

    /// Free decision variables of the QP: x_1..x_N and u_1..u_N.
    pub fn n_free(&self) -> usize {
        (self.state_dim() + self.control_dim()) * self.grid.n_steps()
    }

    pub fn operator(&self) -> OperatorMatrix {
        caputo_operator_matrix(self.alpha, &self.grid)
    }

    /// State cost Hessian block at node k (1..=N): ω_k Q_k, plus T at the end.
    pub(crate) fn state_weight(&self, k: usize) -> DMatrix<f64> {
        let mut w = &self.q[k] * self.quadrature.state[k];
        if k == self.grid.n_steps() {
            w += &self.terminal;
        }
        w
    }

    /// (C D^α x)_k for every node, x given as q × (N+1) samples.
    pub fn caputo(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (q, n) = (x.nrows(), x.ncols());
        let mut out = DMatrix::zeros(q, n);
        let x0 = x.column(0);
        for k in 1..n {
            let jmax = k.min(self.gl_len.saturating_sub(1));
            let mut acc = DVector::zeros(q);
            for j in 0..=jmax {
                acc += (x.column(k - j) - x0) * self.gl[j];
            }
            out.set_column(k, &(acc * self.scale));
        }
        out
    }

    /// (C D^α x)_k − A_k x_k − B_k u_k − d_k, zero at node 0.
    pub fn constraint_residual(&self, x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut res = self.caputo(x);
        res.set_column(0, &DVector::zeros(x.nrows()));
        for k in 1..x.ncols() {
            let rhs = &self.model.a[k] * x.column(k)
                + &self.model.b[k] * u.column(k)
                + &self.model.drift[k];
            let mut col = res.column_mut(k);
            col -= rhs;
        }
        res
    }
}
