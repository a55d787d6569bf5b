use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracops::Grid;
use crate::simulate::SimulationResult;
use crate::transcribe::Trajectory;

/// Anything carrying state and control samples.
pub trait Sampled {
    fn states(&self) -> &DMatrix<f64>;
    fn controls(&self) -> &DMatrix<f64>;
    fn cost(&self) -> Option<f64> {
        None
    }
}

impl Sampled for Trajectory {
    fn states(&self) -> &DMatrix<f64> {
        &self.x
    }
    fn controls(&self) -> &DMatrix<f64> {
        &self.u
    }
    fn cost(&self) -> Option<f64> {
        Some(self.cost)
    }
}

impl Sampled for SimulationResult {
    fn states(&self) -> &DMatrix<f64> {
        &self.x
    }
    fn controls(&self) -> &DMatrix<f64> {
        &self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub max_diff_x: f64,
    pub max_diff_u: f64,
    /// |J_a − J_b| when both sides carry a cost.
    pub cost_diff: Option<f64>,
}

pub fn compare_trajectories(a: &impl Sampled, b: &impl Sampled, grid: &Grid) -> Result<Comparison> {
    let (xa, xb, ua, ub) = (a.states(), b.states(), a.controls(), b.controls());
    if xa.shape() != xb.shape() || ua.shape() != ub.shape() {
        return Err(Error::input("trajectories have different shapes"));
    }
    grid.check_len(xa.ncols(), "trajectory")?;
    Ok(Comparison {
        max_diff_x: (xa - xb).amax(),
        max_diff_u: (ua - ub).amax(),
        cost_diff: a.cost().zip(b.cost()).map(|(p, q)| (p - q).abs()),
    })
}

/// Every `factor`-th column, for comparing a fine grid against a coarse one.
pub fn restrict(samples: &DMatrix<f64>, factor: usize) -> Result<DMatrix<f64>> {
    if factor == 0 || !(samples.ncols() - 1).is_multiple_of(factor) {
        return Err(Error::input(format!(
            "cannot restrict {} samples by a factor of {factor}",
            samples.ncols()
        )));
    }
    let n = (samples.ncols() - 1) / factor + 1;
    Ok(DMatrix::from_fn(samples.nrows(), n, |i, k| {
        samples[(i, k * factor)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::oscillator;
    use crate::transcribe::solve_linear;

    #[test]
    fn self_comparison_is_zero() {
        let p = oscillator(0.95);
        let grid = Grid::new(2.0, 40).unwrap();
        let (traj, _) = solve_linear(&p, &grid).unwrap();
        let c = compare_trajectories(&traj, &traj, &grid).unwrap();
        assert_eq!(c.max_diff_x, 0.0);
        assert_eq!(c.max_diff_u, 0.0);
        assert_eq!(c.cost_diff, Some(0.0));
    }

    #[test]
    fn restrict_picks_every_factor_column() {
        let m = DMatrix::from_fn(1, 9, |_, k| k as f64);
        let r = restrict(&m, 4).unwrap();
        assert_eq!(r.as_slice(), &[0.0, 4.0, 8.0]);
        assert!(restrict(&m, 3).is_err());
        assert!(restrict(&m, 0).is_err());
    }
}
