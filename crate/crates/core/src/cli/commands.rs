use std::path::Path;

use serde::Serialize;

use super::output::{
    read_gains, write_gains, write_json, write_simulation, write_table, write_trajectory,
};
use super::problem_file::{load_problem, ProblemFile};
use super::{Command, CommonArgs};
use crate::error::{Error, Result};
use crate::fracops::{FractionalOrder, Grid};
use crate::model::{
    builtin_description, evaluate_cost, sample_reference, Plant, TrackingProblem, BUILTIN_NAMES,
};
use crate::simulate::{simulate_closed_loop, tracking_metrics, TrackingMetrics};
use crate::synthesis::{synthesize, GainSchedule, SynthesisReport};
use crate::transcribe::{solve, SolveReport};
use crate::verify::{brute_force_oracle, classical_oracle, optimality_probe, BRUTE_FORCE_CAP};

/// Grid used by the brute-force cross-check in `verify`.
const BRUTE_FORCE_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// Machine-readable record of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub input: Option<ProblemFile>,
    pub solve: SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<TrackingMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<Check>>,
}

impl RunReport {
    fn new(command: &str, problem: &TrackingProblem, grid: &Grid, solve: SolveReport) -> Self {
        RunReport {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            input: ProblemFile::describe(problem, grid).ok(),
            solve,
            synthesis: None,
            metrics: None,
            checks: None,
        }
    }
}

fn setup(args: &CommonArgs) -> Result<(TrackingProblem, Grid)> {
    let (mut problem, mut grid) = load_problem(&args.problem)?;
    if let Some(a) = args.alpha {
        problem = problem.with_alpha(FractionalOrder::new(a)?);
    }
    if let Some(n) = args.grid {
        grid = Grid::new(problem.t_final(), n)?;
    }
    std::fs::create_dir_all(&args.out)?;
    Ok((problem, grid))
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Solve(args) => {
            let (problem, grid) = setup(args)?;
            run_solve(&problem, &grid, &args.out)
        }
        Command::Gains(args) => {
            let (problem, grid) = setup(args)?;
            run_gains(&problem, &grid, &args.out).map(|_| ())
        }
        Command::Simulate { common, gains, x0 } => {
            let (problem, grid) = setup(common)?;
            run_simulate(
                &problem,
                &grid,
                &common.out,
                gains.as_deref(),
                x0.as_deref(),
            )
        }
        Command::Verify {
            common,
            seed,
            tol_override,
        } => {
            let (problem, grid) = setup(common)?;
            run_verify(&problem, &grid, &common.out, *seed, *tol_override)
        }
        Command::Sweep {
            common,
            alpha_list,
            q_scale_list,
        } => {
            let (problem, grid) = setup(common)?;
            run_sweep(
                &problem,
                &grid,
                &common.out,
                alpha_list.as_deref(),
                q_scale_list.as_deref(),
            )
        }
        Command::ListProblems => {
            for name in BUILTIN_NAMES {
                println!("{name:<12} {}", builtin_description(name).unwrap_or(""));
            }
            Ok(())
        }
    }
}

fn run_solve(problem: &TrackingProblem, grid: &Grid, out: &Path) -> Result<()> {
    let sol = solve(problem, grid)?;
    let t = &sol.trajectory;
    let reference = sample_reference(problem.reference(), grid)?;
    write_trajectory(
        &out.join("trajectory.csv"),
        grid,
        &t.x,
        &t.u,
        &t.lam,
        &reference,
    )?;
    write_json(
        &RunReport::new("solve", problem, grid, sol.report),
        &out.join("report.json"),
    )
}

struct GainsOutcome {
    cost: f64,
    schedule: GainSchedule,
    report: SynthesisReport,
}

fn run_gains(problem: &TrackingProblem, grid: &Grid, out: &Path) -> Result<GainsOutcome> {
    let syn = synthesize(problem, grid)?;
    let t = &syn.trajectory;
    let reference = sample_reference(problem.reference(), grid)?;
    write_trajectory(
        &out.join("trajectory.csv"),
        grid,
        &t.x,
        &t.u,
        &t.lam,
        &reference,
    )?;
    write_gains(&out.join("gains.csv"), &syn.schedule)?;
    let metrics = tracking_metrics(&t.x, &t.u, &reference, grid)?;
    let mut report = RunReport::new("gains", problem, grid, syn.report.solve.clone());
    report.synthesis = Some(syn.report.clone());
    report.metrics = Some(metrics);
    write_json(&report, &out.join("report.json"))?;
    Ok(GainsOutcome {
        cost: t.cost,
        schedule: syn.schedule,
        report: syn.report,
    })
}

fn run_simulate(
    problem: &TrackingProblem,
    grid: &Grid,
    out: &Path,
    gains_path: Option<&Path>,
    x0: Option<&[f64]>,
) -> Result<()> {
    let problem = match x0 {
        Some(v) => problem.with_x0(nalgebra::DVector::from_column_slice(v))?,
        None => problem.clone(),
    };
    let (schedule, solve_report) = match gains_path {
        Some(path) => {
            let s = read_gains(
                path,
                problem.state_dim(),
                problem.control_dim(),
                grid,
                problem.alpha(),
            )?;
            (s, solve(&problem, grid)?.report)
        }
        None => {
            let syn = synthesize(&problem, grid)?;
            (syn.schedule, syn.report.solve)
        }
    };
    let sim = simulate_closed_loop(problem.plant(), &schedule, problem.x0(), grid)?;
    let reference = sample_reference(problem.reference(), grid)?;
    let sim = sim.retarget(&reference, grid)?;
    write_simulation(
        &out.join("closed_loop.csv"),
        grid,
        &sim.x,
        &sim.u,
        &reference,
    )?;
    let mut report = RunReport::new("simulate", &problem, grid, solve_report);
    report.metrics = Some(sim.metrics);
    write_json(&report, &out.join("report.json"))
}

fn run_verify(
    problem: &TrackingProblem,
    grid: &Grid,
    out: &Path,
    seed: u64,
    tol_override: Option<f64>,
) -> Result<()> {
    let scale = match tol_override {
        Some(f) if f.is_finite() && f > 0.0 => {
            log::warn!("tolerances scaled by {f}; results are not comparable with the default acceptance levels");
            f
        }
        Some(f) => {
            return Err(Error::input(format!(
                "--tol-override must be positive, got {f}"
            )))
        }
        None => 1.0,
    };
    let syn = synthesize(problem, grid)?;
    let traj = &syn.trajectory;
    let rep = &syn.report.solve;
    let mut checks = vec![
        Check::at_most(
            "residual_stationarity",
            rep.residual_stationarity,
            1e-7 * scale,
        ),
        Check::at_most("residual_dynamics", rep.residual_dynamics, 1e-7 * scale),
        Check::at_most(
            "kkt_relative_residual",
            rep.kkt_relative_residual,
            1e-9 * scale,
        ),
    ];

    let probe = optimality_probe(traj, problem, grid, 100, seed)?;
    checks.push(Check::at_most(
        "probe_cost_decrease",
        -probe.min_delta,
        1e-8 * scale,
    ));

    let sim = simulate_closed_loop(problem.plant(), &syn.schedule, problem.x0(), grid)?;
    let cl_cost = evaluate_cost(&sim.x, &sim.u, problem, grid)?;
    checks.push(Check::at_most(
        "closed_loop_state_diff",
        (&sim.x - &traj.x).amax(),
        1e-3 * scale,
    ));
    checks.push(Check::at_most(
        "closed_loop_cost_rel_diff",
        (cl_cost - traj.cost).abs() / traj.cost.abs().max(f64::MIN_POSITIVE),
        1e-3 * scale,
    ));

    if let Plant::Linear(_) = problem.plant() {
        let bgrid = Grid::new(problem.t_final(), grid.n_steps().min(BRUTE_FORCE_STEPS))?;
        if (problem.state_dim() + problem.control_dim()) * bgrid.len() <= BRUTE_FORCE_CAP {
            let brute = brute_force_oracle(problem, &bgrid)?;
            let (t, _) = crate::transcribe::solve_linear(problem, &bgrid)?;
            checks.push(Check::at_most(
                "brute_force_cost_rel_diff",
                (brute.cost - t.cost).abs() / brute.cost.abs().max(f64::MIN_POSITIVE),
                1e-8 * scale,
            ));
            checks.push(Check::at_most(
                "brute_force_control_diff",
                (&brute.u - &t.u).amax(),
                1e-7 * scale,
            ));
        }
        if problem.alpha() == FractionalOrder::ONE {
            let oracle = classical_oracle(problem, grid)?.closed_loop(problem)?;
            checks.push(Check::at_most(
                "classical_cost_rel_diff",
                (oracle.cost - traj.cost).abs() / oracle.cost.abs().max(f64::MIN_POSITIVE),
                1e-4 * scale,
            ));
        }
    }

    for c in &checks {
        println!(
            "{} {:<28} {:.3e} (tolerance {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    let mut report = RunReport::new("verify", problem, grid, syn.report.solve.clone());
    report.synthesis = Some(syn.report);
    report.checks = Some(checks.clone());
    write_json(&report, &out.join("report.json"))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

fn run_sweep(
    problem: &TrackingProblem,
    grid: &Grid,
    out: &Path,
    alphas: Option<&[f64]>,
    q_scales: Option<&[f64]>,
) -> Result<()> {
    let alphas = alphas
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![problem.alpha().value()]);
    let q_scales = q_scales.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0]);
    let mut rows = Vec::new();
    for &a in &alphas {
        for &s in &q_scales {
            let p = problem
                .with_alpha(FractionalOrder::new(a)?)
                .with_q_scaled(s)?;
            let dir = out.join(format!("alpha_{a}_q_{s}"));
            std::fs::create_dir_all(&dir)?;
            let g = run_gains(&p, grid, &dir)?;
            let sim = simulate_closed_loop(p.plant(), &g.schedule, p.x0(), grid)?;
            let reference = sample_reference(p.reference(), grid)?;
            let cl = tracking_metrics(&sim.x, &sim.u, &reference, grid)?;
            rows.push(vec![
                a,
                s,
                g.cost,
                cl.ise,
                cl.ise_components[0],
                g.report.solve.residual_stationarity,
                g.report.solve.residual_dynamics,
                g.report.solve.residual_costate,
                g.report.residual_riccati,
                g.report.residual_offset,
            ]);
        }
    }
    let header: Vec<String> = [
        "alpha",
        "q_scale",
        "cost",
        "ise",
        "ise_x_0",
        "residual_stationarity",
        "residual_dynamics",
        "residual_costate",
        "residual_riccati",
        "residual_offset",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    write_table(&out.join("summary.csv"), &header, rows.into_iter())
}
