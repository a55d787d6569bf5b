use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::plant::{LinearPlant, NonlinearPlant, Plant, TimeMatrix, VanDerPol};
use super::problem::{TrackingProblem, Weights};
use super::reference::{PolyCosine, ReferenceSignal};
use crate::error::{Error, Result};
use crate::fracops::FractionalOrder;

pub const BUILTIN_NAMES: [&str; 3] = ["vdp_q1", "vdp_q10", "mass_spring"];

/// Constant term of the mass-spring reference. The tracking cost uses −1/3;
/// the printed control law shows −4/3.
pub const MASS_SPRING_REFERENCE_CONSTANT: f64 = -1.0 / 3.0;

/// One-line provenance for `list-problems`.
pub fn builtin_description(name: &str) -> Option<&'static str> {
    match name {
        "vdp_q1" => Some("fractional Van der Pol tracking, alpha=0.9, t_f=5, Q=diag(1,1), r=(1-0.4t)cos t"),
        "vdp_q10" => Some("fractional Van der Pol tracking with q11=10, otherwise as vdp_q1"),
        "mass_spring" => Some("5-mass spring chain, q=10, alpha=0.95, t_f=10, m=10 kg, k=1 N/m"),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuiltinOptions {
    pub mass_spring_reference_constant: f64,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        BuiltinOptions {
            mass_spring_reference_constant: MASS_SPRING_REFERENCE_CONSTANT,
        }
    }
}

pub fn builtin_problem(name: &str) -> Result<TrackingProblem> {
    builtin_problem_with(name, BuiltinOptions::default())
}

pub fn builtin_problem_with(name: &str, opts: BuiltinOptions) -> Result<TrackingProblem> {
    match name {
        "vdp_q1" => van_der_pol(name, 1.0),
        "vdp_q10" => van_der_pol(name, 10.0),
        "mass_spring" => mass_spring(opts.mass_spring_reference_constant),
        _ => Err(Error::input(format!(
            "unknown builtin problem '{name}'; valid names: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

pub fn van_der_pol_plant() -> Result<NonlinearPlant> {
    NonlinearPlant::new("van_der_pol", Arc::new(VanDerPol))
}

fn van_der_pol(name: &str, q11: f64) -> Result<TrackingProblem> {
    TrackingProblem::new(
        name,
        Plant::Nonlinear(van_der_pol_plant()?),
        Weights {
            q: TimeMatrix::Constant(DMatrix::from_diagonal(&DVector::from_vec(vec![q11, 1.0]))),
            r: TimeMatrix::Constant(DMatrix::identity(1, 1)),
            terminal: DMatrix::zeros(2, 2),
            cost_order: FractionalOrder::ONE,
        },
        ReferenceSignal::PolyCosine(vec![
            PolyCosine {
                poly: vec![1.0, -0.4],
                omega: 1.0,
            },
            PolyCosine {
                poly: vec![],
                omega: 0.0,
            },
        ]),
        DVector::from_vec(vec![1.0, 0.0]),
        FractionalOrder::new(0.9)?,
        5.0,
    )
}

/// Tridiagonal chain stiffness: diagonal κ_l + κ_{l+1} (last entry κ_L),
/// off-diagonal −κ_{l+1}.
pub fn stiffness_matrix(stiffnesses: &[f64]) -> DMatrix<f64> {
    let l = stiffnesses.len();
    let mut k = DMatrix::zeros(l, l);
    for i in 0..l {
        k[(i, i)] = stiffnesses[i] + if i + 1 < l { stiffnesses[i + 1] } else { 0.0 };
        if i + 1 < l {
            k[(i, i + 1)] = -stiffnesses[i + 1];
            k[(i + 1, i)] = -stiffnesses[i + 1];
        }
    }
    k
}

/// A = [[0, I], [−M⁻¹κ, 0]], B = [0, …, 0, 1/m_L]ᵀ.
pub fn build_mass_spring(l: usize, masses: &[f64], stiffnesses: &[f64]) -> Result<LinearPlant> {
    if l < 2 {
        return Err(Error::input(format!(
            "mass-spring chain needs L >= 2, got {l}"
        )));
    }
    if masses.len() != l || stiffnesses.len() != l {
        return Err(Error::input(format!(
            "mass-spring chain of length {l} needs {l} masses and {l} stiffnesses"
        )));
    }
    if masses
        .iter()
        .chain(stiffnesses)
        .any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::input("masses and stiffnesses must be positive"));
    }
    let kappa = stiffness_matrix(stiffnesses);
    let mut a = DMatrix::zeros(2 * l, 2 * l);
    for i in 0..l {
        a[(i, l + i)] = 1.0;
        for j in 0..l {
            a[(l + i, j)] = -kappa[(i, j)] / masses[i];
        }
    }
    let mut b = DMatrix::zeros(2 * l, 1);
    b[(2 * l - 1, 0)] = 1.0 / masses[l - 1];
    LinearPlant::constant(a, b)
}

fn mass_spring(reference_constant: f64) -> Result<TrackingProblem> {
    const L: usize = 5;
    let masses = [10.0; L];
    let stiffnesses = [1.0; L];
    let plant = build_mass_spring(L, &masses, &stiffnesses)?;
    let kappa = stiffness_matrix(&stiffnesses);
    // The printed cost has no ½; folding a factor 2 into Q and R keeps the
    // internal ½-convention and leaves u* and K unchanged.
    let mut q = DMatrix::zeros(2 * L, 2 * L);
    q.view_mut((0, 0), (L, L)).copy_from(&(&kappa * 2.0));
    for i in 0..L {
        q[(L + i, L + i)] = 2.0 * masses[i];
    }
    let mut coeffs = vec![Vec::new(); 2 * L];
    coeffs[3] = vec![reference_constant, 163.0 / 450.0, -13.0 / 450.0];
    let mut x0 = DVector::zeros(2 * L);
    x0[L - 1] = 1.0;
    TrackingProblem::new(
        "mass_spring",
        Plant::Linear(plant),
        Weights {
            q: TimeMatrix::Constant(q),
            r: TimeMatrix::Constant(DMatrix::from_element(1, 1, 2.0)),
            terminal: DMatrix::zeros(2 * L, 2 * L),
            cost_order: FractionalOrder::ONE,
        },
        ReferenceSignal::Polynomial(coeffs),
        x0,
        FractionalOrder::new(0.95)?,
        10.0,
    )
}
