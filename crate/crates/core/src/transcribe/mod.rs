//! Open-loop optimal solver.
//!
//! The tracking problem is transcribed on a uniform grid with the GL Caputo
//! operator: dynamics are collocated at nodes 1..N, node 0 carries the
//! initial condition. The resulting equality-constrained QP is solved by
//! eliminating the states (the dynamics operator is block lower-triangular),
//! and the multipliers of the dynamics rows give the discrete costate.

mod discretize;
mod reduced;
mod residuals;
mod solve;

pub use discretize::{discretize, discretize_with_model, DiscretizedProblem, NodeModel};
pub use reduced::{QpSolution, ReducedQp};
pub use residuals::{optimality_residuals, residuals_with_model, Residuals};
pub use solve::{
    solve, solve_linear, solve_nonlinear, solve_nonlinear_detailed, LinearizationOptions, Solution,
    SolveReport, Trajectory,
};
