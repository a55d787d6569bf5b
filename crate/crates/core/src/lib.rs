//! Closed-loop optimal controllers for fractional-order linear-quadratic
//! tracking problems with Caputo dynamics.
//!
//! The solver transcribes the tracking problem with a Grünwald–Letnikov
//! discretization, solves the resulting equality-constrained QP, extracts the
//! time-varying Riccati matrix and feedforward term from solve ensembles, and
//! checks the first-order optimality system as numerical residuals.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod fracops;
pub mod model;
pub mod simulate;
pub mod synthesis;
pub mod transcribe;
pub mod verify;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
