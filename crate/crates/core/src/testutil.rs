//! Small problems shared by the unit tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::fracops::FractionalOrder;
use crate::model::{
    Dynamics, LinearPlant, NonlinearPlant, Plant, ReferenceSignal, TimeMatrix, TrackingProblem,
    Weights,
};

pub(crate) fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

pub(crate) fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

pub(crate) fn weights(q: DMatrix<f64>, r: DMatrix<f64>, t: DMatrix<f64>) -> Weights {
    Weights {
        q: TimeMatrix::Constant(q),
        r: TimeMatrix::Constant(r),
        terminal: t,
        cost_order: FractionalOrder::ONE,
    }
}

/// D^α x = a x + b u, cost ½ t e(t_f)² + ½∫ q e² + r u² with e = x − reference.
pub(crate) struct Scalar {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub t: f64,
    pub x0: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub reference: Option<Vec<f64>>,
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar {
            a: -1.0,
            b: 1.0,
            q: 1.0,
            r: 1.0,
            t: 0.0,
            x0: 1.0,
            alpha: 0.95,
            t_final: 1.0,
            reference: None,
        }
    }
}

impl Scalar {
    pub(crate) fn build(&self) -> TrackingProblem {
        let plant = LinearPlant::constant(m1(self.a), m1(self.b)).unwrap();
        let reference = match &self.reference {
            Some(c) => ReferenceSignal::Polynomial(vec![c.clone()]),
            None => ReferenceSignal::Zero { dim: 1 },
        };
        TrackingProblem::new(
            "scalar",
            Plant::Linear(plant),
            weights(m1(self.q), m1(self.r), m1(self.t)),
            reference,
            DVector::from_element(1, self.x0),
            order(self.alpha),
            self.t_final,
        )
        .unwrap()
    }
}

/// Two-state oscillator with a polynomial reference on the first state.
pub(crate) fn oscillator(alpha: f64) -> TrackingProblem {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    TrackingProblem::new(
        "oscillator",
        Plant::Linear(LinearPlant::constant(a, b).unwrap()),
        weights(
            DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.5])),
            m1(0.2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
        ),
        ReferenceSignal::Polynomial(vec![vec![0.5, -0.2, 0.05], vec![0.0]]),
        DVector::from_vec(vec![1.0, 0.0]),
        order(alpha),
        2.0,
    )
    .unwrap()
}

/// A constant linear plant seen only through the nonlinear interface.
#[derive(Debug)]
pub(crate) struct LinearAsDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl Dynamics for LinearAsDynamics {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn control_dim(&self) -> usize {
        self.b.ncols()
    }
    fn f(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
    fn jacobian_x(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        self.a.clone()
    }
    fn jacobian_u(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        self.b.clone()
    }
}

pub(crate) fn as_nonlinear(problem: &TrackingProblem) -> TrackingProblem {
    let lin = problem.plant().as_linear().unwrap();
    let dynamics = LinearAsDynamics {
        a: lin.a.at(0.0),
        b: lin.b.at(0.0),
    };
    let plant = NonlinearPlant::new("linear", Arc::new(dynamics)).unwrap();
    problem.with_plant(Plant::Nonlinear(plant)).unwrap()
}
