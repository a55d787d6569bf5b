//! Independent oracles: classical LQT at α = 1, a dense brute-force optimum,
//! random-perturbation optimality probes and trajectory comparison.

mod brute;
mod classical;
mod compare;
mod probe;

pub use brute::{brute_force_oracle, BRUTE_FORCE_CAP};
pub use classical::{classical_oracle, OracleGains, OracleRollout, REFINEMENT};
pub use compare::{compare_trajectories, restrict, Comparison, Sampled};
pub use probe::{optimality_probe, ProbeReport, FEASIBILITY_TOL, PROBE_SCALE, PROBE_TOL};
