//! Problem definitions: plants, weights, references, cost evaluation and the
//! builtin examples.

mod builtin;
mod cost;
mod plant;
mod problem;
mod reference;

pub use builtin::{
    build_mass_spring, builtin_description, builtin_problem, builtin_problem_with,
    stiffness_matrix, van_der_pol_plant, BuiltinOptions, BUILTIN_NAMES,
    MASS_SPRING_REFERENCE_CONSTANT,
};
pub use cost::{co_reference, co_reference_numeric, evaluate_cost, CostQuadrature};
pub use plant::{Dynamics, LinearPlant, NonlinearPlant, Plant, TimeMatrix, VanDerPol};
pub use problem::{TrackingProblem, Weights};
pub use reference::{
    polynomial_caputo, reference_caputo_numeric, sample_reference, PolyCosine, ReferenceSignal,
};
