#![allow(dead_code)]

use fotrack::fracops::{FractionalOrder, Grid};
use fotrack::model::{LinearPlant, Plant, ReferenceSignal, TimeMatrix, TrackingProblem, Weights};
use nalgebra::{DMatrix, DVector};

pub fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

pub fn grid(t_final: f64, n: usize) -> Grid {
    Grid::new(t_final, n).unwrap()
}

fn weights(q: DMatrix<f64>, r: DMatrix<f64>, t: DMatrix<f64>) -> Weights {
    Weights {
        q: TimeMatrix::Constant(q),
        r: TimeMatrix::Constant(r),
        terminal: t,
        cost_order: FractionalOrder::ONE,
    }
}

/// C D^α x = −x + u, x0 = 1, q = r = 1 on [0, 1], optional terminal weight
/// and linear reference.
pub fn scalar(alpha: f64, terminal: f64, reference: Option<[f64; 2]>) -> TrackingProblem {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let reference = match reference {
        Some(c) => ReferenceSignal::Polynomial(vec![c.to_vec()]),
        None => ReferenceSignal::Zero { dim: 1 },
    };
    TrackingProblem::new(
        "scalar",
        Plant::Linear(LinearPlant::constant(one(-1.0), one(1.0)).unwrap()),
        weights(one(1.0), one(1.0), one(terminal)),
        reference,
        DVector::from_element(1, 1.0),
        order(alpha),
        1.0,
    )
    .unwrap()
}

/// Damped oscillator tracking a slow cosine on its first state over [0, 3].
pub fn two_state(alpha: f64) -> TrackingProblem {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.5, -0.4]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    TrackingProblem::new(
        "two_state",
        Plant::Linear(LinearPlant::constant(a, b).unwrap()),
        weights(
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.5])),
            DMatrix::from_element(1, 1, 0.3),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0])),
        ),
        ReferenceSignal::PolyCosine(vec![
            fotrack::model::PolyCosine {
                poly: vec![0.8],
                omega: 1.2,
            },
            fotrack::model::PolyCosine {
                poly: vec![],
                omega: 0.0,
            },
        ]),
        DVector::from_vec(vec![0.0, 0.5]),
        order(alpha),
        3.0,
    )
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
