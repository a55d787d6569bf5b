//! Closed-loop gain synthesis.
//!
//! P(t) is extracted from an ensemble of regulator solves, K = R⁻¹BᵀP, and the
//! feedforward l and costate offset z are read off the tracking optimum, so
//! that u* = −K x* + l and λ* = P (x* − r) + z hold on the grid.

mod extract;
mod residuals;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

pub use extract::{
    feedforward, kalman_gain, kalman_gain_with_model, riccati_from_ensemble, riccati_from_model,
    RiccatiSamples, RIDGE, RIDGE_TRIGGER,
};
pub use residuals::{co_reference_with_model, riccati_residuals, RiccatiResiduals};

use crate::error::{Error, Result};
use crate::fracops::{FractionalOrder, Grid};
use crate::model::TrackingProblem;
use crate::transcribe::{solve, SolveReport, Trajectory};

/// Time-varying feedback law sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub p: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    pub z: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub grid: Grid,
    pub alpha: FractionalOrder,
}

impl GainSchedule {
    pub fn state_dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.l.nrows()
    }

    /// Feedback-only schedule (l ≡ 0, z ≡ 0, P unknown and left zero).
    pub fn from_gains(
        k: Vec<DMatrix<f64>>,
        l: DMatrix<f64>,
        grid: Grid,
        alpha: FractionalOrder,
    ) -> Result<Self> {
        grid.check_len(k.len(), "gain samples")?;
        grid.check_len(l.ncols(), "feedforward samples")?;
        let (r, q) = k[0].shape();
        if k.iter().any(|m| m.shape() != (r, q)) || l.nrows() != r {
            return Err(Error::input("gain samples have inconsistent shapes"));
        }
        Ok(GainSchedule {
            p: vec![DMatrix::zeros(q, q); grid.len()],
            k,
            z: DMatrix::zeros(q, grid.len()),
            l,
            grid,
            alpha,
        })
    }

    /// u_k = −K_k x_k + l_k.
    pub fn control(&self, k: usize, x: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        self.l.column(k) - &self.k[k] * x
    }
}

/// Diagnostics that accompany a synthesized schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisReport {
    pub solve: SolveReport,
    pub residual_riccati: f64,
    pub residual_offset: f64,
    /// Largest ‖P − Pᵀ‖_F / ‖P‖_F over nodes.
    pub max_asymmetry: f64,
    pub max_snapshot_condition: f64,
    /// ‖P(t_f) − T‖ max-norm; not imposed, only reported.
    pub terminal_p_error: f64,
    /// ‖z(t_f)‖ max-norm; the costate ends at T (x − r), so z(t_f) is zero
    /// in the continuous problem.
    pub terminal_z_error: f64,
    /// Smallest eigenvalue of the symmetric part of P(0).
    pub min_eig_p0: f64,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub schedule: GainSchedule,
    pub trajectory: Trajectory,
    pub report: SynthesisReport,
}

/// Solve (by successive linearization for nonlinear plants), extract P from
/// the regulator ensemble on the same node model, then K, l and z.
pub fn synthesize(problem: &TrackingProblem, grid: &Grid) -> Result<Synthesis> {
    let sol = solve(problem, grid)?;
    let ric = riccati_from_model(problem, grid, &sol.model)?;
    let k = kalman_gain_with_model(&ric.p, &sol.model, problem, grid)?;
    let (l, z) = feedforward(problem, grid, &k, &ric.p, &sol.trajectory)?;
    let res = riccati_residuals(&ric.p, &z, &sol.trajectory, problem, &sol.model, grid)?;

    let n = grid.n_steps();
    let terminal_p_error = (&ric.p[n] - &problem.weights().terminal).amax();
    let terminal_z_error = z.column(n).amax();
    let p0 = &ric.p[0];
    let min_eig_p0 = SymmetricEigen::new((p0 + p0.transpose()) * 0.5)
        .eigenvalues
        .min();
    let report = SynthesisReport {
        solve: sol.report,
        residual_riccati: res.riccati,
        residual_offset: res.offset,
        max_asymmetry: ric.asymmetry.iter().copied().fold(0.0, f64::max),
        max_snapshot_condition: ric.snapshot_condition.iter().copied().fold(0.0, f64::max),
        terminal_p_error,
        terminal_z_error,
        min_eig_p0,
    };
    log::info!(
        "synthesized gains: riccati residual {:.3e}, offset residual {:.3e}, max asymmetry {:.3e}",
        res.riccati,
        res.offset,
        report.max_asymmetry
    );
    Ok(Synthesis {
        schedule: GainSchedule {
            p: ric.p,
            k,
            z,
            l,
            grid: *grid,
            alpha: problem.alpha(),
        },
        trajectory: sol.trajectory,
        report,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::model::{builtin_problem, ReferenceSignal};
    use crate::testutil::{oscillator, Scalar};

    #[test]
    fn zero_weights_give_zero_riccati() {
        let p = Scalar {
            q: 0.0,
            t: 0.0,
            ..Default::default()
        }
        .build();
        let grid = Grid::new(1.0, 40).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        assert!(s.schedule.p.iter().all(|m| m.amax() == 0.0));
        assert!(s.schedule.k.iter().all(|m| m.amax() == 0.0));
    }

    #[test]
    fn kalman_gain_arithmetic() {
        let p = oscillator(0.95);
        let grid = Grid::new(2.0, 4).unwrap();
        let pk = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let k = kalman_gain(&vec![pk; 5], &p, &grid).unwrap();
        // B = (0, 1)ᵀ, R = 0.2.
        let expected = DMatrix::from_row_slice(1, 2, &[5.0, 15.0]);
        assert!(k.iter().all(|m| (m - &expected).amax() < 1e-14));
    }

    #[test]
    fn no_actuation_gives_zero_gain() {
        let p = Scalar {
            b: 0.0,
            ..Default::default()
        }
        .build();
        let grid = Grid::new(1.0, 40).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        assert!(s.schedule.k.iter().all(|m| m.amax() == 0.0));
        assert!(s.schedule.p[0][(0, 0)] > 0.0);
    }

    #[test]
    fn van_der_pol_gain_shape() {
        let p = builtin_problem("vdp_q1").unwrap();
        let grid = Grid::new(5.0, 60).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        assert_eq!(s.schedule.k.len(), 61);
        assert!(s.schedule.k.iter().all(|m| m.shape() == (1, 2)));
        assert_eq!(s.schedule.l.shape(), (1, 61));
        assert_eq!(s.schedule.z.shape(), (2, 61));
    }

    #[test]
    fn regulator_has_no_feedforward() {
        let p = oscillator(0.95)
            .with_reference(ReferenceSignal::Zero { dim: 2 })
            .unwrap();
        let grid = Grid::new(2.0, 150).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        let scale = s.trajectory.u.amax().max(s.trajectory.lam.amax());
        assert!(
            s.schedule.l.amax() < 1e-10 * scale,
            "{}",
            s.schedule.l.amax()
        );
        assert!(
            s.schedule.z.amax() < 1e-10 * scale,
            "{}",
            s.schedule.z.amax()
        );
    }

    #[test]
    fn affine_law_reproduces_optimum() {
        let p = oscillator(0.93);
        let grid = Grid::new(2.0, 150).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        let reference = crate::model::sample_reference(p.reference(), &grid).unwrap();
        let t = &s.trajectory;
        for k in 0..=150 {
            let x = t.x.column(k).into_owned();
            let u = s.schedule.control(k, &x);
            assert!((u - t.u.column(k)).amax() < 1e-14 * t.u.amax().max(1.0));
            let lam = &s.schedule.p[k] * (&x - reference.column(k)) + s.schedule.z.column(k);
            assert!((lam - t.lam.column(k)).amax() < 1e-12 * t.lam.amax().max(1.0));
        }
    }

    #[test]
    fn gain_does_not_depend_on_reference() {
        let p = oscillator(0.9);
        let grid = Grid::new(2.0, 100).unwrap();
        let tracking = synthesize(&p, &grid).unwrap();
        let regulator = synthesize(
            &p.with_reference(ReferenceSignal::Zero { dim: 2 }).unwrap(),
            &grid,
        )
        .unwrap();
        assert_eq!(tracking.schedule.k, regulator.schedule.k);
        assert_eq!(tracking.schedule.p, regulator.schedule.p);
    }

    #[test]
    fn scalar_riccati_near_steady_state() {
        // a = 0, b = q = r = 1, long horizon: P(0) approaches 1.
        let p = Scalar {
            a: 0.0,
            alpha: 1.0,
            t_final: 20.0,
            ..Default::default()
        }
        .build();
        let grid = Grid::new(20.0, 2000).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        let p0 = s.schedule.p[0][(0, 0)];
        assert!((p0 - 1.0).abs() < 2e-2, "{p0}");
        assert!(s.report.min_eig_p0 > 0.0);
    }

    #[test]
    fn riccati_residuals_shrink_at_alpha_one() {
        let p = Scalar {
            alpha: 1.0,
            reference: Some(vec![0.5, 0.3]),
            t: 1.0,
            ..Default::default()
        }
        .build();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for n in [100, 200, 400] {
            let s = synthesize(&p, &Grid::new(1.0, n).unwrap()).unwrap();
            let r = (s.report.residual_riccati, s.report.residual_offset);
            assert!(
                r.0 < prev.0 / 1.5 && r.1 < prev.1 / 1.5,
                "N = {n}: {r:?} vs {prev:?}"
            );
            prev = r;
        }
        assert!(prev.0 < 1e-2 && prev.1 < 1e-2, "{prev:?}");
    }

    #[test]
    fn scalar_report_is_consistent() {
        let p = Scalar::default().build();
        let grid = Grid::new(1.0, 80).unwrap();
        let s = synthesize(&p, &grid).unwrap();
        assert_eq!(s.report.max_asymmetry, 0.0);
        assert!(s.report.terminal_z_error < 1e-12);
        assert_eq!(s.schedule.state_dim(), 1);
        assert_eq!(s.schedule.control_dim(), 1);
        let x = DVector::from_element(1, 2.0);
        let expected = s.schedule.l[(0, 3)] - s.schedule.k[3][(0, 0)] * 2.0;
        assert_eq!(s.schedule.control(3, &x)[0], expected);
    }
}
