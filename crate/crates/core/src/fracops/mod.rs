//! Fractional-calculus kernel.

mod caputo;
mod gamma;
mod grid;
mod mittag_leffler;
mod rl;

pub(crate) use caputo::effective_len;
pub use caputo::{
    caputo_apply, caputo_apply_rows, caputo_apply_rows_order, caputo_operator_matrix, gl_weights,
    OperatorMatrix,
};
pub use gamma::{gamma, ln_gamma};
pub use grid::{FractionalOrder, Grid};
pub use mittag_leffler::{mittag_leffler, MITTAG_LEFFLER_MAX_ARG};
pub use rl::{rl_integral, rl_step_weights, rl_weights};
