use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::discretize::DiscretizedProblem;
use crate::error::{Error, Result};

/// Largest acceptable condition estimate of the reduced Hessian.
pub const MAX_CONDITION: f64 = 1e14;

/// Condensed QP in the controls u_1..u_N.
///
/// With x = S u + d from forward substitution through the lower-triangular
/// dynamics, the cost becomes ½ uᵀ H u + gᵀ u with
/// H = Sᵀ W_x S + blkdiag(ρ_k R_k). S is stored pre-multiplied by the
/// symmetric square root of W_x. One factorization serves any number of
/// right-hand sides (initial states, references, drifts).
pub struct ReducedQp<'a> {
    dp: &'a DiscretizedProblem,
    m_inv: Vec<DMatrix<f64>>,
    w_half: Vec<DMatrix<f64>>,
    partial_sums: Vec<f64>,
    s_tilde: DMatrix<f64>,
    hess: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    /// Costate λ_k = ν_k / ρ_k; λ_0 is extrapolated linearly from λ_1, λ_2.
    pub lam: DMatrix<f64>,
    /// Raw multipliers of the dynamics rows (column 0 unused).
    pub nu: DMatrix<f64>,
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn mat_vec(m: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    let q = m.nrows();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (c, &vc) in v.iter().enumerate() {
        let col = &m.as_slice()[c * q..(c + 1) * q];
        for (o, &mc) in out.iter_mut().zip(col) {
            *o += mc * vc;
        }
    }
}

impl<'a> ReducedQp<'a> {
    pub fn new(dp: &'a DiscretizedProblem) -> Result<Self> {
        let q = dp.state_dim();
        let r = dp.control_dim();
        let n = dp.grid.n_steps();
        let diag = dp.scale * dp.gl[0];

        let mut m_inv = Vec::with_capacity(n + 1);
        m_inv.push(DMatrix::zeros(q, q));
        for k in 1..=n {
            let m = DMatrix::identity(q, q) * diag - &dp.model.a[k];
            let inv = m.clone().lu().try_inverse().ok_or_else(|| Error::Solver {
                message: format!("collocation matrix singular at node {k}"),
                condition: f64::INFINITY,
            })?;
            m_inv.push(inv);
        }

        let mut w_half = Vec::with_capacity(n + 1);
        w_half.push(DMatrix::zeros(q, q));
        for k in 1..=n {
            w_half.push(symmetric_sqrt(&dp.state_weight(k)));
        }

        let mut partial_sums = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for w in &dp.gl {
            acc += w;
            partial_sums.push(acc);
        }

        let mut qp = ReducedQp {
            dp,
            m_inv,
            w_half,
            partial_sums,
            s_tilde: DMatrix::zeros(q * n, r * n),
            hess: DMatrix::zeros(r * n, r * n),
            chol: Cholesky::new(DMatrix::identity(1, 1)).expect("identity is PD"),
            condition: 1.0,
        };
        qp.build_sensitivity();
        qp.build_hessian()?;
        Ok(qp)
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn problem(&self) -> &DiscretizedProblem {
        self.dp
    }

    /// Σ_{j=1}^{min(k−first, L−1)} w_j x_{k−j} over flat node-major storage.
    fn history(&self, xs: &[f64], k: usize, first: usize, out: &mut [f64]) {
        let q = out.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let jmax = (k - first).min(self.dp.gl_len.saturating_sub(1));
        for j in 1..=jmax {
            let wj = self.dp.gl[j];
            let xk = &xs[(k - j) * q..(k - j + 1) * q];
            for (o, &xv) in out.iter_mut().zip(xk) {
                *o += wj * xv;
            }
        }
    }

    /// Solves the dynamics for x given rhs_k = B_k u_k + d_k at nodes 1..N.
    fn propagate(&self, rhs: &DMatrix<f64>, x0: &DVector<f64>) -> DMatrix<f64> {
        let q = self.dp.state_dim();
        let n = self.dp.grid.n_steps();
        let s = self.dp.scale;
        let mut xs = vec![0.0; q * (n + 1)];
        xs[..q].copy_from_slice(x0.as_slice());
        let mut hist = vec![0.0; q];
        let mut acc = vec![0.0; q];
        let mut xk = vec![0.0; q];
        for k in 1..=n {
            self.history(&xs, k, 0, &mut hist);
            let pk = self.partial_sums[k];
            for i in 0..q {
                acc[i] = rhs[(i, k)] + s * pk * x0[i] - s * hist[i];
            }
            mat_vec(&self.m_inv[k], &acc, &mut xk);
            xs[k * q..(k + 1) * q].copy_from_slice(&xk);
        }
        DMatrix::from_vec(q, n + 1, xs)
    }

    /// Response of x_1..x_N to a unit input column applied at node `start`.
    fn impulse(&self, start: usize, input: &[f64], out: &mut [f64]) {
        let q = self.dp.state_dim();
        let n = self.dp.grid.n_steps();
        let s = self.dp.scale;
        let mut xs = vec![0.0; q * (n + 1)];
        let mut hist = vec![0.0; q];
        let mut acc = vec![0.0; q];
        let mut xk = vec![0.0; q];
        for k in start..=n {
            self.history(&xs, k, start, &mut hist);
            for i in 0..q {
                let b = if k == start { input[i] } else { 0.0 };
                acc[i] = b - s * hist[i];
            }
            mat_vec(&self.m_inv[k], &acc, &mut xk);
            xs[k * q..(k + 1) * q].copy_from_slice(&xk);
        }
        out.copy_from_slice(&xs[q..]);
    }

    fn build_sensitivity(&mut self) {
        let q = self.dp.state_dim();
        let r = self.dp.control_dim();
        let n = self.dp.grid.n_steps();
        let rows = q * n;
        let mut col = vec![0.0; rows];
        if self.dp.model.is_time_invariant() {
            // Responses to inputs at later nodes are delayed copies of the
            // node-1 response; the recursion does identical arithmetic.
            for i in 0..r {
                let input: Vec<f64> = self.dp.model.b[1].column(i).iter().copied().collect();
                self.impulse(1, &input, &mut col);
                for j in 1..=n {
                    let c = (j - 1) * r + i;
                    let offset = (j - 1) * q;
                    let dst = &mut self.s_tilde.as_mut_slice()[c * rows..(c + 1) * rows];
                    dst[..offset].iter_mut().for_each(|v| *v = 0.0);
                    dst[offset..].copy_from_slice(&col[..rows - offset]);
                }
            }
        } else {
            for j in 1..=n {
                for i in 0..r {
                    let input: Vec<f64> = self.dp.model.b[j].column(i).iter().copied().collect();
                    self.impulse(j, &input, &mut col);
                    let c = (j - 1) * r + i;
                    self.s_tilde.as_mut_slice()[c * rows..(c + 1) * rows].copy_from_slice(&col);
                }
            }
        }
        // Pre-multiply each block row by W_k^{1/2}.
        let mut tmp = vec![0.0; q];
        for c in 0..r * n {
            let start_node = c / r + 1;
            let data = &mut self.s_tilde.as_mut_slice()[c * rows..(c + 1) * rows];
            for k in start_node..=n {
                let blk = &mut data[(k - 1) * q..k * q];
                mat_vec(&self.w_half[k], blk, &mut tmp);
                blk.copy_from_slice(&tmp);
            }
        }
    }

    fn build_hessian(&mut self) -> Result<()> {
        let q = self.dp.state_dim();
        let r = self.dp.control_dim();
        let n = self.dp.grid.n_steps();
        let rows = q * n;
        let m = r * n;
        let s = self.s_tilde.as_slice();
        let mut hess = DMatrix::zeros(m, m);
        for c2 in 0..m {
            let start2 = (c2 / r) * q;
            let col2 = &s[c2 * rows..(c2 + 1) * rows];
            for c1 in 0..=c2 {
                let col1 = &s[c1 * rows..(c1 + 1) * rows];
                let v = dot(&col1[start2..], &col2[start2..]);
                hess[(c1, c2)] = v;
                hess[(c2, c1)] = v;
            }
        }
        for k in 1..=n {
            let blk = &self.dp.r[k] * self.dp.quadrature.control[k];
            let o = (k - 1) * r;
            let mut view = hess.view_mut((o, o), (r, r));
            view += blk;
        }
        let chol = Cholesky::new(hess.clone()).ok_or_else(|| Error::Solver {
            message: "reduced Hessian is not positive definite".into(),
            condition: f64::INFINITY,
        })?;
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..m {
            let d = l[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition = (hi / lo).powi(2);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::Solver {
                message: "reduced Hessian is ill-conditioned".into(),
                condition,
            });
        }
        self.hess = hess;
        self.chol = chol;
        self.condition = condition;
        Ok(())
    }

    /// Solves with the discretized problem's own x0, reference and drift.
    pub fn solve_default(&self) -> QpSolution {
        self.solve(&self.dp.x0, &self.dp.reference, &self.dp.model.drift)
    }

    pub fn solve(
        &self,
        x0: &DVector<f64>,
        reference: &DMatrix<f64>,
        drift: &[DVector<f64>],
    ) -> QpSolution {
        let dp = self.dp;
        let q = dp.state_dim();
        let r = dp.control_dim();
        let n = dp.grid.n_steps();
        let rows = q * n;
        let m = r * n;

        let mut drift_rhs = DMatrix::zeros(q, n + 1);
        for k in 1..=n {
            drift_rhs.set_column(k, &drift[k]);
        }
        let free = self.propagate(&drift_rhs, x0);

        let mut y = vec![0.0; rows];
        let mut tmp = vec![0.0; q];
        for k in 1..=n {
            let e: Vec<f64> = (0..q).map(|i| free[(i, k)] - reference[(i, k)]).collect();
            mat_vec(&self.w_half[k], &e, &mut tmp);
            y[(k - 1) * q..k * q].copy_from_slice(&tmp);
        }
        let s = self.s_tilde.as_slice();
        let g = DVector::from_fn(m, |c, _| {
            let start = (c / r) * q;
            dot(&s[c * rows + start..(c + 1) * rows], &y[start..])
        });

        let mut u = -self.chol.solve(&g);
        let res = &self.hess * &u + &g;
        u -= self.chol.solve(&res);

        let mut rhs = drift_rhs;
        let mut u_full = DMatrix::zeros(r, n + 1);
        for k in 1..=n {
            let uk = u.rows((k - 1) * r, r);
            u_full.set_column(k, &uk);
            let bu = &dp.model.b[k] * uk;
            let mut col = rhs.column_mut(k);
            col += bu;
        }
        let x = self.propagate(&rhs, x0);

        // Multipliers by back substitution through the transposed operator.
        let sc = dp.scale;
        let mut nu = DMatrix::zeros(q, n + 1);
        for j in (1..=n).rev() {
            let e = x.column(j) - reference.column(j);
            let mut acc = dp.state_weight(j) * e;
            let kmax = n.min(j + dp.gl_len.saturating_sub(1));
            for k in (j + 1)..=kmax {
                acc -= nu.column(k) * (sc * dp.gl[k - j]);
            }
            let nj = self.m_inv[j].transpose() * acc;
            nu.set_column(j, &nj);
        }
        let mut lam = DMatrix::zeros(q, n + 1);
        for j in 1..=n {
            lam.set_column(j, &(nu.column(j) / dp.quadrature.control[j]));
        }
        let lam0 = lam.column(1) * 2.0 - lam.column(2);
        lam.set_column(0, &lam0);
        // u_0 does not act on the collocated dynamics; report the value that
        // satisfies stationarity against the extrapolated costate.
        let u0 = -dp.r[0]
            .clone()
            .cholesky()
            .map(|c| c.solve(&(dp.model.b[0].transpose() * &lam0)))
            .unwrap_or_else(|| DVector::zeros(r));
        u_full.set_column(0, &u0);

        QpSolution {
            x,
            u: u_full,
            lam,
            nu,
        }
    }

    /// Relative residual of the full KKT system: for each block of rows
    /// (dynamics, control stationarity, state stationarity) the largest
    /// residual over the largest term magnitude in that block.
    pub fn kkt_relative_residual(&self, sol: &QpSolution, reference: &DMatrix<f64>) -> f64 {
        let dp = self.dp;
        let n = dp.grid.n_steps();
        let dx = dp.caputo(&sol.x);
        let mut res = [0.0f64; 3];
        let mut scale = [f64::MIN_POSITIVE; 3];
        for k in 1..=n {
            let ax = &dp.model.a[k] * sol.x.column(k);
            let bu = &dp.model.b[k] * sol.u.column(k);
            let r = dx.column(k) - &ax - &bu - &dp.model.drift[k];
            res[0] = res[0].max(r.amax());
            scale[0] = scale[0]
                .max(dx.column(k).amax())
                .max(ax.amax())
                .max(bu.amax())
                .max(dp.model.drift[k].amax());

            let ru = &dp.r[k] * sol.u.column(k) * dp.quadrature.control[k];
            let bn = dp.model.b[k].transpose() * sol.nu.column(k);
            res[1] = res[1].max((&ru + &bn).amax());
            scale[1] = scale[1].max(ru.amax()).max(bn.amax());
        }
        let sc = dp.scale;
        for j in 1..=n {
            let we = dp.state_weight(j) * (sol.x.column(j) - reference.column(j));
            let an = dp.model.a[j].transpose() * sol.nu.column(j);
            let mut dn = DVector::zeros(dp.state_dim());
            let kmax = n.min(j + dp.gl_len.saturating_sub(1));
            for k in j..=kmax {
                dn += sol.nu.column(k) * (sc * dp.gl[k - j]);
            }
            res[2] = res[2].max((&we + &an - &dn).amax());
            scale[2] = scale[2].max(we.amax()).max(an.amax()).max(dn.amax());
        }
        (0..3).map(|i| res[i] / scale[i]).fold(0.0, f64::max)
    }
}
