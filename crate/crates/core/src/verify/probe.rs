use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracops::Grid;
use crate::model::{evaluate_cost, TrackingProblem};
use crate::simulate::{simulate_open_loop, SimulationResult};
use crate::transcribe::Trajectory;

/// A probe succeeds when no perturbation lowers the cost by more than this.
pub const PROBE_TOL: f64 = -1e-8;
/// Perturbation amplitude relative to max(‖u‖∞, 1).
pub const PROBE_SCALE: f64 = 1e-3;
/// Largest simulate-vs-trajectory mismatch accepted as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeReport {
    pub n_perturb: usize,
    pub seed: u64,
    /// min over perturbations of J(u + δu) − J(u).
    pub min_delta: f64,
    pub success: bool,
}

fn rollout_cost(
    problem: &TrackingProblem,
    grid: &Grid,
    u: &DMatrix<f64>,
) -> Result<(SimulationResult, f64)> {
    let sim = simulate_open_loop(problem.plant(), u, problem.x0(), problem.alpha(), grid)?;
    let cost = evaluate_cost(&sim.x, u, problem, grid)?;
    Ok((sim, cost))
}

/// Re-propagates the dynamics under seeded random control perturbations and
/// reports the largest cost decrease found.
pub fn optimality_probe(
    traj: &Trajectory,
    problem: &TrackingProblem,
    grid: &Grid,
    n_perturb: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let (sim, base) = rollout_cost(problem, grid, &traj.u)?;
    let mismatch = (&sim.x - &traj.x).amax();
    if mismatch > FEASIBILITY_TOL * traj.x.amax().max(1.0) {
        return Err(Error::Precondition(format!(
            "trajectory is not feasible: simulated states differ by {mismatch:.3e}"
        )));
    }
    let scale = PROBE_SCALE * traj.u.amax().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_delta = if n_perturb == 0 { 0.0 } else { f64::INFINITY };
    for _ in 0..n_perturb {
        let du = DMatrix::from_fn(traj.u.nrows(), traj.u.ncols(), |_, _| {
            rng.random_range(-1.0..=1.0) * scale
        });
        let (_, cost) = rollout_cost(problem, grid, &(&traj.u + du))?;
        min_delta = min_delta.min(cost - base);
    }
    Ok(ProbeReport {
        n_perturb,
        seed,
        min_delta,
        success: min_delta >= PROBE_TOL,
    })
}
