use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracops::{FractionalOrder, Grid};
use crate::model::{evaluate_cost, LinearPlant, Plant, TrackingProblem};
use crate::simulate::simulate_closed_loop;
use crate::synthesis::GainSchedule;

/// Oracle sub-steps per solver step.
pub const REFINEMENT: usize = 4;

/// Classical LQT gains at solver nodes, from fine-grid RK4 integration.
///
/// Convention: λ = P x + g, so u = −K x + l with l = −R⁻¹Bᵀg, and the
/// costate offset is z = λ − P (x − r) = g + P r.
#[derive(Debug, Clone)]
pub struct OracleGains {
    pub p: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    pub z: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub grid: Grid,
    fine_k: Vec<DMatrix<f64>>,
    fine_l: Vec<DVector<f64>>,
}

/// Closed-loop rollout of the oracle law with its cost.
#[derive(Debug, Clone)]
pub struct OracleRollout {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub cost: f64,
}

struct Coeffs<'a> {
    plant: &'a LinearPlant,
    problem: &'a TrackingProblem,
}

impl Coeffs<'_> {
    fn s(&self, t: f64) -> DMatrix<f64> {
        let b = self.plant.b.at(t);
        let r = self.problem.weights().r.at(t);
        let rinv_bt = r.cholesky().expect("validated R").solve(&b.transpose());
        b * rinv_bt
    }

    /// Backward-time right-hand side of (P, g):
    /// Ṗ = −(Q + AᵀP + PA − P S P),  ġ = −(A − S P)ᵀ g + Q r.
    fn rhs(&self, t: f64, p: &DMatrix<f64>, g: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let a = self.plant.a.at(t);
        let q = self.problem.weights().q.at(t);
        let s = self.s(t);
        let r = self.problem.reference().eval(t);
        let pdot = -(&q + a.transpose() * p + p * &a - p * &s * p);
        let gdot = -(&a - &s * p).transpose() * g + &q * r;
        (pdot, gdot)
    }
}

fn linear_plant(problem: &TrackingProblem) -> Result<&LinearPlant> {
    match problem.plant() {
        Plant::Linear(p) => Ok(p),
        Plant::Nonlinear(_) => Err(Error::Precondition(
            "the classical oracle needs a linear plant".into(),
        )),
    }
}

/// Integrates the Riccati and offset equations backward from
/// P(t_f) = T, g(t_f) = −T r(t_f) with RK4 on a grid four times finer.
pub fn classical_oracle(problem: &TrackingProblem, grid: &Grid) -> Result<OracleGains> {
    if problem.alpha() != FractionalOrder::ONE {
        return Err(Error::Precondition(format!(
            "the classical oracle needs alpha = 1, got {}",
            problem.alpha().value()
        )));
    }
    let plant = linear_plant(problem)?;
    let c = Coeffs { plant, problem };
    let (qd, rd) = (problem.state_dim(), problem.control_dim());
    let fine = grid.n_steps() * REFINEMENT;
    let hf = grid.t_final() / fine as f64;
    let t_of = |i: usize| {
        if i == fine {
            grid.t_final()
        } else {
            i as f64 * hf
        }
    };

    let mut ps = vec![DMatrix::zeros(qd, qd); fine + 1];
    let mut gs = vec![DVector::zeros(qd); fine + 1];
    let tf = grid.t_final();
    ps[fine] = problem.weights().terminal.clone();
    gs[fine] = -(&problem.weights().terminal * problem.reference().eval(tf));
    for i in (0..fine).rev() {
        let (t1, t0) = (t_of(i + 1), t_of(i));
        let dt = t0 - t1;
        let tm = 0.5 * (t0 + t1);
        let (p, g) = (&ps[i + 1], &gs[i + 1]);
        let (k1p, k1g) = c.rhs(t1, p, g);
        let (k2p, k2g) = c.rhs(tm, &(p + &k1p * (0.5 * dt)), &(g + &k1g * (0.5 * dt)));
        let (k3p, k3g) = c.rhs(tm, &(p + &k2p * (0.5 * dt)), &(g + &k2g * (0.5 * dt)));
        let (k4p, k4g) = c.rhs(t0, &(p + &k3p * dt), &(g + &k3g * dt));
        let pn = p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        let gn = g + (k1g + k2g * 2.0 + k3g * 2.0 + k4g) * (dt / 6.0);
        ps[i] = (&pn + pn.transpose()) * 0.5;
        gs[i] = gn;
    }

    let mut fine_k = Vec::with_capacity(fine + 1);
    let mut fine_l = Vec::with_capacity(fine + 1);
    for i in 0..=fine {
        let t = t_of(i);
        let chol = problem.weights().r.at(t).cholesky().expect("validated R");
        let bt = plant.b.at(t).transpose();
        fine_k.push(chol.solve(&(&bt * &ps[i])));
        fine_l.push(-chol.solve(&(&bt * &gs[i])));
    }

    let n = grid.len();
    let mut p = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut z = DMatrix::zeros(qd, n);
    let mut l = DMatrix::zeros(rd, n);
    for j in 0..n {
        let i = j * REFINEMENT;
        let r = problem.reference().eval(grid.t(j));
        z.set_column(j, &(&gs[i] + &ps[i] * r));
        l.set_column(j, &fine_l[i]);
        p.push(ps[i].clone());
        k.push(fine_k[i].clone());
    }
    Ok(OracleGains {
        p,
        k,
        z,
        l,
        grid: *grid,
        fine_k,
        fine_l,
    })
}

impl OracleGains {
    pub fn to_schedule(&self) -> GainSchedule {
        GainSchedule {
            p: self.p.clone(),
            k: self.k.clone(),
            z: self.z.clone(),
            l: self.l.clone(),
            grid: self.grid,
            alpha: FractionalOrder::ONE,
        }
    }

    /// The oracle law applied on the solver grid: the same implicit stepping
    /// and cost quadrature as the transcription, so the cost gap to the
    /// discrete optimum is second order in the gain error.
    pub fn closed_loop(&self, problem: &TrackingProblem) -> Result<OracleRollout> {
        let sim = simulate_closed_loop(
            problem.plant(),
            &self.to_schedule(),
            problem.x0(),
            &self.grid,
        )?;
        let cost = evaluate_cost(&sim.x, &sim.u, problem, &self.grid)?;
        Ok(OracleRollout {
            x: sim.x,
            u: sim.u,
            cost,
        })
    }

    /// RK4 rollout of ẋ = A x + B(−K x + l) together with the running cost,
    /// stepping two fine intervals at a time so that midpoints are fine nodes.
    pub fn rollout_continuous(&self, problem: &TrackingProblem) -> Result<OracleRollout> {
        let plant = linear_plant(problem)?;
        let w = problem.weights();
        let fine = self.fine_k.len() - 1;
        let hf = self.grid.t_final() / fine as f64;
        let t_of = |i: usize| {
            if i == fine {
                self.grid.t_final()
            } else {
                i as f64 * hf
            }
        };
        let qd = problem.state_dim();

        // Augmented state (x, running cost).
        let field = |i: usize, x: &DVector<f64>| -> (DVector<f64>, f64) {
            let t = t_of(i);
            let u = &self.fine_l[i] - &self.fine_k[i] * x;
            let dx = plant.a.at(t) * x + plant.b.at(t) * &u;
            let e = x - problem.reference().eval(t);
            let run = 0.5
                * ((e.transpose() * w.q.at(t) * &e)[(0, 0)]
                    + (u.transpose() * w.r.at(t) * &u)[(0, 0)]);
            (dx, run)
        };

        let n = self.grid.len();
        let mut xs = DMatrix::zeros(qd, n);
        let mut us = DMatrix::zeros(problem.control_dim(), n);
        let mut x = problem.x0().clone();
        let mut cost = 0.0;
        let half = REFINEMENT / 2;
        let record = |j: usize, x: &DVector<f64>, xs: &mut DMatrix<f64>, us: &mut DMatrix<f64>| {
            let i = j * REFINEMENT;
            xs.set_column(j, x);
            us.set_column(j, &(&self.fine_l[i] - &self.fine_k[i] * x));
        };
        record(0, &x, &mut xs, &mut us);
        for i in (0..fine).step_by(2) {
            let dt = t_of(i + 2) - t_of(i);
            let (k1, c1) = field(i, &x);
            let (k2, c2) = field(i + 1, &(&x + &k1 * (0.5 * dt)));
            let (k3, c3) = field(i + 1, &(&x + &k2 * (0.5 * dt)));
            let (k4, c4) = field(i + 2, &(&x + &k3 * dt));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            cost += (c1 + 2.0 * c2 + 2.0 * c3 + c4) * (dt / 6.0);
            if (i + 2) % (2 * half) == 0 {
                record((i + 2) / REFINEMENT, &x, &mut xs, &mut us);
            }
        }
        let e = &x - problem.reference().eval(self.grid.t_final());
        cost += 0.5 * (e.transpose() * &w.terminal * &e)[(0, 0)];
        Ok(OracleRollout { x: xs, u: us, cost })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_problem;
    use crate::testutil::Scalar;

    #[test]
    fn zero_terminal_weight_pins_end() {
        let p = Scalar {
            alpha: 1.0,
            reference: Some(vec![1.0, -0.5]),
            ..Default::default()
        }
        .build();
        let grid = Grid::new(1.0, 50).unwrap();
        let o = classical_oracle(&p, &grid).unwrap();
        assert_eq!(o.p[50][(0, 0)], 0.0);
        assert_eq!(o.z[(0, 50)], 0.0);
        assert_eq!(o.l[(0, 50)], 0.0);
    }

    #[test]
    fn scalar_riccati_is_tanh() {
        // a = 0, b = q = r = 1: P(t) = tanh(t_f − t).
        let p = Scalar {
            a: 0.0,
            alpha: 1.0,
            t_final: 20.0,
            ..Default::default()
        }
        .build();
        let grid = Grid::new(20.0, 400).unwrap();
        let o = classical_oracle(&p, &grid).unwrap();
        assert!((o.p[0][(0, 0)] - 1.0).abs() < 1e-6);
        for k in 0..=400 {
            let exact = (20.0 - grid.t(k)).tanh();
            assert!((o.p[k][(0, 0)] - exact).abs() < 1e-8, "node {k}");
            assert_eq!(o.k[k], o.p[k]);
        }
    }

    #[test]
    fn preconditions() {
        let frac = Scalar::default().build();
        let grid = Grid::new(1.0, 10).unwrap();
        assert!(matches!(
            classical_oracle(&frac, &grid),
            Err(Error::Precondition(_))
        ));
        let vdp = builtin_problem("vdp_q1")
            .unwrap()
            .with_alpha(FractionalOrder::ONE);
        assert!(matches!(
            classical_oracle(&vdp, &Grid::new(5.0, 10).unwrap()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rollouts_agree_under_refinement() {
        let p = Scalar {
            alpha: 1.0,
            reference: Some(vec![0.5, 0.2]),
            t: 2.0,
            ..Default::default()
        }
        .build();
        let mut prev = f64::INFINITY;
        for n in [50, 100, 200] {
            let o = classical_oracle(&p, &Grid::new(1.0, n).unwrap()).unwrap();
            let discrete = o.closed_loop(&p).unwrap();
            let continuous = o.rollout_continuous(&p).unwrap();
            let gap = (discrete.cost - continuous.cost).abs();
            assert!(gap < prev, "N = {n}: {gap}");
            prev = gap;
        }
        assert!(prev < 1e-2);
    }
}
