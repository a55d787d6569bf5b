use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fracops::Grid;

/// Matrix-valued function of time: constant, or a table with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeMatrix {
    Constant(DMatrix<f64>),
    Table {
        times: Vec<f64>,
        values: Vec<DMatrix<f64>>,
    },
}

impl TimeMatrix {
    pub fn table(times: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::input(
                "matrix table needs matching, non-empty times and values",
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input(
                "matrix table times must be strictly increasing",
            ));
        }
        let shape = values[0].shape();
        if values.iter().any(|m| m.shape() != shape) {
            return Err(Error::input(
                "matrix table entries have inconsistent shapes",
            ));
        }
        Ok(TimeMatrix::Table { times, values })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            TimeMatrix::Constant(m) => m.shape(),
            TimeMatrix::Table { values, .. } => values[0].shape(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeMatrix::Constant(_))
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            TimeMatrix::Constant(m) => m.clone(),
            TimeMatrix::Table { times, values } => {
                if t <= times[0] {
                    return values[0].clone();
                }
                let last = times.len() - 1;
                if t >= times[last] {
                    return values[last].clone();
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                &values[i] * (1.0 - s) + &values[i + 1] * s
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<DMatrix<f64>> {
        (0..grid.len()).map(|k| self.at(grid.t(k))).collect()
    }

    /// Every matrix that can be produced by interpolation is a convex
    /// combination of these.
    pub fn knots(&self) -> Vec<&DMatrix<f64>> {
        match self {
            TimeMatrix::Constant(m) => vec![m],
            TimeMatrix::Table { values, .. } => values.iter().collect(),
        }
    }

    pub fn covers(&self, t_final: f64) -> bool {
        match self {
            TimeMatrix::Constant(_) => true,
            TimeMatrix::Table { times, .. } => times[0] <= 0.0 && *times.last().unwrap() >= t_final,
        }
    }

    pub fn scaled(&self, c: f64) -> TimeMatrix {
        match self {
            TimeMatrix::Constant(m) => TimeMatrix::Constant(m * c),
            TimeMatrix::Table { times, values } => TimeMatrix::Table {
                times: times.clone(),
                values: values.iter().map(|m| m * c).collect(),
            },
        }
    }
}

/// C D^α x = A(t) x + B(t) u.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    pub a: TimeMatrix,
    pub b: TimeMatrix,
}

impl LinearPlant {
    pub fn new(a: TimeMatrix, b: TimeMatrix) -> Result<Self> {
        let (qa, qa2) = a.shape();
        let (qb, r) = b.shape();
        if qa != qa2 {
            return Err(Error::input(format!("A must be square, got {qa}x{qa2}")));
        }
        if qb != qa {
            return Err(Error::input(format!("B has {qb} rows, A has {qa}")));
        }
        if r == 0 || qa == 0 {
            return Err(Error::input("plant dimensions must be positive"));
        }
        Ok(LinearPlant { a, b })
    }

    pub fn constant(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        Self::new(TimeMatrix::Constant(a), TimeMatrix::Constant(b))
    }

    pub fn state_dim(&self) -> usize {
        self.a.shape().0
    }

    pub fn control_dim(&self) -> usize {
        self.b.shape().1
    }

    pub fn is_time_invariant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant()
    }
}

/// Nonlinear dynamics C D^α x = f(x, u, t) with analytic Jacobians.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn f(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64>;
    fn jacobian_x(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DMatrix<f64>;
    fn jacobian_u(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DMatrix<f64>;
}

#[derive(Debug, Clone)]
pub struct NonlinearPlant {
    name: String,
    dynamics: Arc<dyn Dynamics>,
}

impl PartialEq for NonlinearPlant {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

const JACOBIAN_PROBES: usize = 8;
const JACOBIAN_TOL: f64 = 1e-5;

impl NonlinearPlant {
    /// Wraps `dynamics` after checking its Jacobians against central
    /// differences at seeded random points in [−2, 2]^n × [0, t_probe].
    pub fn new(name: impl Into<String>, dynamics: Arc<dyn Dynamics>) -> Result<Self> {
        let plant = NonlinearPlant {
            name: name.into(),
            dynamics,
        };
        plant.check_jacobians(0x5eed, 5.0)?;
        Ok(plant)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn check_jacobians(&self, seed: u64, t_probe: f64) -> Result<()> {
        let d = self.dynamics.as_ref();
        let (q, r) = (d.state_dim(), d.control_dim());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..JACOBIAN_PROBES {
            let x = DVector::from_fn(q, |_, _| rng.random_range(-2.0..2.0));
            let u = DVector::from_fn(r, |_, _| rng.random_range(-2.0..2.0));
            let t = rng.random_range(0.0..t_probe);
            let jx = d.jacobian_x(&x, &u, t);
            let ju = d.jacobian_u(&x, &u, t);
            if jx.shape() != (q, q) || ju.shape() != (q, r) {
                return Err(Error::input(format!(
                    "plant '{}': Jacobian shapes {:?}/{:?} do not match dimensions ({q}, {r})",
                    self.name,
                    jx.shape(),
                    ju.shape()
                )));
            }
            let fd_x = central_difference(|xp| d.f(xp, &u, t), &x);
            let fd_u = central_difference(|up| d.f(&x, up, t), &u);
            for (analytic, numeric, which) in [(&jx, &fd_x, "x"), (&ju, &fd_u, "u")] {
                let err = (analytic - numeric).amax();
                let scale = analytic.amax().max(1.0);
                if err > JACOBIAN_TOL * scale {
                    return Err(Error::input(format!(
                        "plant '{}': jacobian_{which} disagrees with finite differences by {err:.3e}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn central_difference<F>(f: F, at: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let base = f(at);
    let mut jac = DMatrix::zeros(base.len(), at.len());
    for j in 0..at.len() {
        let step = 1e-6 * at[j].abs().max(1.0);
        let mut plus = at.clone();
        let mut minus = at.clone();
        plus[j] += step;
        minus[j] -= step;
        let col = (f(&plus) - f(&minus)) / (2.0 * step);
        jac.set_column(j, &col);
    }
    jac
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Linear(LinearPlant),
    Nonlinear(NonlinearPlant),
}

impl Plant {
    pub fn state_dim(&self) -> usize {
        match self {
            Plant::Linear(p) => p.state_dim(),
            Plant::Nonlinear(p) => p.state_dim(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Plant::Linear(p) => p.control_dim(),
            Plant::Nonlinear(p) => p.control_dim(),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearPlant> {
        match self {
            Plant::Linear(p) => Some(p),
            Plant::Nonlinear(_) => None,
        }
    }

    /// f(x, u, t) for either kind of plant.
    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        match self {
            Plant::Linear(p) => p.a.at(t) * x + p.b.at(t) * u,
            Plant::Nonlinear(p) => p.dynamics().f(x, u, t),
        }
    }
}

/// Fractional Van der Pol oscillator: f = [x2, −x1 + (1 − x1²)x2 + u].
#[derive(Debug, Clone, Copy, Default)]
pub struct VanDerPol;

impl Dynamics for VanDerPol {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn f(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        DVector::from_vec(vec![x[1], -x[0] + (1.0 - x[0] * x[0]) * x[1] + u[0]])
    }

    fn jacobian_x(&self, x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0 - 2.0 * x[0] * x[1], 1.0 - x[0] * x[0]],
        )
    }

    fn jacobian_u(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct BadJacobian;

    impl Dynamics for BadJacobian {
        fn state_dim(&self) -> usize {
            1
        }
        fn control_dim(&self) -> usize {
            1
        }
        fn f(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
            DVector::from_element(1, x[0] * x[0] + u[0])
        }
        fn jacobian_x(&self, x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, x[0])
        }
        fn jacobian_u(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, 1.0)
        }
    }

    #[test]
    fn van_der_pol_jacobians_pass_self_check() {
        assert!(NonlinearPlant::new("vdp", Arc::new(VanDerPol)).is_ok());
    }

    #[test]
    fn wrong_jacobian_is_rejected() {
        let err = NonlinearPlant::new("bad", Arc::new(BadJacobian)).unwrap_err();
        assert!(err.to_string().contains("jacobian_x"));
    }

    #[test]
    fn table_interpolates_linearly() {
        let m = TimeMatrix::table(
            vec![0.0, 2.0],
            vec![
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, 3.0),
            ],
        )
        .unwrap();
        assert_eq!(m.at(1.0)[(0, 0)], 2.0);
        assert_eq!(m.at(0.5)[(0, 0)], 1.5);
        assert!(m.covers(2.0));
        assert!(!m.covers(2.5));
    }

    #[test]
    fn plant_dimension_checks() {
        assert!(LinearPlant::constant(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1)).is_err());
        assert!(LinearPlant::constant(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1)).is_err());
        assert!(LinearPlant::constant(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1)).is_ok());
    }
}
