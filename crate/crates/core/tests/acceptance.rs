//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::Instant;

use fotrack::fracops::{caputo_apply, rl_integral, FractionalOrder, Grid};
use fotrack::model::{
    builtin_problem, evaluate_cost, sample_reference, TrackingProblem, BUILTIN_NAMES,
};
use fotrack::simulate::{simulate_closed_loop, tracking_metrics};
use fotrack::synthesis::{synthesize, Synthesis};
use fotrack::transcribe::{solve, solve_linear};
use fotrack::verify::{brute_force_oracle, classical_oracle, optimality_probe};
use fotrack::Result;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn grid_for(p: &TrackingProblem, n: usize) -> Result<Grid> {
    Grid::new(p.t_final(), n)
}

fn order(a: f64) -> Result<FractionalOrder> {
    FractionalOrder::new(a)
}

/// Max relative gap between sequences of matrices, each entry scaled by
/// max(1, largest entry of the reference).
fn max_gap(a: &[DMatrix<f64>], b: &[DMatrix<f64>], c: f64) -> f64 {
    let scale = b.iter().map(|m| m.amax()).fold(1.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x * c - y).amax())
        .fold(0.0, f64::max)
        / scale
}

fn kernel() -> Result<Verdict> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 0.9, 0.95] {
        let err = |n: usize| -> Result<f64> {
            let g = Grid::new(1.0, n)?;
            let f: Vec<f64> = g.nodes().iter().map(|t| t * t).collect();
            let d = caputo_apply(&f, order(alpha)?, &g)?;
            let c = gamma(3.0) / gamma(3.0 - alpha);
            Ok(g.nodes()
                .iter()
                .zip(&d)
                .map(|(t, v)| (v - c * t.powf(2.0 - alpha)).abs())
                .fold(0.0, f64::max))
        };
        let (e500, e1000) = (err(500)?, err(1000)?);
        let ratio = e500 / e1000;
        pass &= e1000 <= 2e-2 && ratio >= 1.7;
        parts.push(format!(
            "alpha {alpha}: err {e1000:.2e} (<= 2e-2), ratio {ratio:.2} (>= 1.7)"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 1.0;
    Ok(Verdict::new(
        pass,
        format!("{}; {secs:.3} s (< 1 s)", parts.join("; ")),
    ))
}

fn classical_reduction() -> Result<Verdict> {
    let start = Instant::now();
    let p = builtin_problem("mass_spring")?.with_alpha(FractionalOrder::ONE);
    let g = grid_for(&p, 1000)?;
    let syn = synthesize(&p, &g)?;
    let oracle = classical_oracle(&p, &g)?;
    let rollout = oracle.closed_loop(&p)?;
    let cost_rel = rel(syn.trajectory.cost, rollout.cost);
    let k_err = syn
        .schedule
        .k
        .iter()
        .zip(&oracle.k)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        cost_rel <= 1e-4 && k_err <= 1e-3 && secs < 60.0,
        format!("cost rel {cost_rel:.2e} (<= 1e-4); K max err {k_err:.2e} (<= 1e-3); {secs:.1} s (< 60 s)"),
    ))
}

fn dual_path() -> Result<Verdict> {
    let start = Instant::now();
    let p = builtin_problem("mass_spring")?;
    let g = grid_for(&p, 200)?;
    let (fast, _) = solve_linear(&p, &g)?;
    let dense = brute_force_oracle(&p, &g)?;
    let cost_rel = rel(fast.cost, dense.cost);
    let u_err = (&fast.u - &dense.u).amax();
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        cost_rel <= 1e-8 && u_err <= 1e-7 && secs < 30.0,
        format!(
            "cost rel {cost_rel:.2e} (<= 1e-8); u err {u_err:.2e} (<= 1e-7); {secs:.1} s (< 30 s)"
        ),
    ))
}

fn optimality_conditions() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in BUILTIN_NAMES {
        let p = builtin_problem(name)?;
        let mut costate = Vec::new();
        let (mut stat, mut dynamics) = (0.0f64, 0.0f64);
        for n in [250, 500, 1000] {
            let r = solve(&p, &grid_for(&p, n)?)?.report;
            stat = stat.max(r.residual_stationarity);
            dynamics = dynamics.max(r.residual_dynamics);
            costate.push(r.residual_costate);
        }
        let decreasing =
            costate.iter().all(|c| c.is_finite()) && costate.windows(2).all(|w| w[1] < w[0]);
        pass &= stat <= 1e-7 && dynamics <= 1e-7 && decreasing;
        parts.push(format!(
            "{name}: stationarity {stat:.1e}, dynamics {dynamics:.1e} (<= 1e-7), costate {:.3}/{:.3}/{:.3} ({})",
            costate[0],
            costate[1],
            costate[2],
            if decreasing { "decreasing" } else { "NOT decreasing" }
        ));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn closed_loop_law() -> Result<Verdict> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, alpha) in [("mass_spring", 0.95), ("vdp_q1", 0.9)] {
        let p = builtin_problem(name)?.with_alpha(order(alpha)?);
        let g = grid_for(&p, 500)?;
        let syn = synthesize(&p, &g)?;
        let sim = simulate_closed_loop(p.plant(), &syn.schedule, p.x0(), &g)?;
        let x_err = (&sim.x - &syn.trajectory.x).amax();
        let cost_rel = rel(evaluate_cost(&sim.x, &sim.u, &p, &g)?, syn.trajectory.cost);
        pass &= x_err <= 1e-3 && cost_rel <= 1e-3;
        parts.push(format!(
            "{name}: x err {x_err:.2e}, cost rel {cost_rel:.2e} (<= 1e-3)"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    Ok(Verdict::new(
        pass,
        format!("{}; {secs:.1} s (< 120 s)", parts.join("; ")),
    ))
}

fn affine_structure() -> Result<Verdict> {
    let p = builtin_problem("mass_spring")?;
    let g = grid_for(&p, 500)?;
    let syn = synthesize(&p, &g)?;
    let s = &syn.schedule;
    let reference = sample_reference(p.reference(), &g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut u_worst, mut lam_worst) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let x0 = DVector::from_fn(p.state_dim(), |_, _| rng.random_range(-1.0..=1.0));
        let (fresh, _) = solve_linear(&p.with_x0(x0)?, &g)?;
        let (u_scale, lam_scale) = (fresh.u.amax().max(1.0), fresh.lam.amax().max(1.0));
        for k in 0..g.len() {
            let x = fresh.x.column(k);
            let du = fresh.u.column(k) + &s.k[k] * x - s.l.column(k);
            let dl = fresh.lam.column(k) - &s.p[k] * (x - reference.column(k)) - s.z.column(k);
            u_worst = u_worst.max(du.amax() / u_scale);
            lam_worst = lam_worst.max(dl.amax() / lam_scale);
        }
    }
    Ok(Verdict::new(
        u_worst <= 1e-3 && lam_worst <= 1e-3,
        format!("5 fresh initial states: control {u_worst:.2e}, costate {lam_worst:.2e} (<= 1e-3, scaled)"),
    ))
}

fn closed_loop_ise(name: &str) -> Result<f64> {
    let p = builtin_problem(name)?.with_alpha(order(0.9)?);
    let g = grid_for(&p, 500)?;
    let syn = synthesize(&p, &g)?;
    let sim = simulate_closed_loop(p.plant(), &syn.schedule, p.x0(), &g)?;
    let reference = sample_reference(p.reference(), &g)?;
    Ok(tracking_metrics(&sim.x, &sim.u, &reference, &g)?.ise_components[0])
}

fn qualitative_claim() -> Result<Verdict> {
    let (q1, q10) = (closed_loop_ise("vdp_q1")?, closed_loop_ise("vdp_q10")?);
    Ok(Verdict::new(
        q10 < q1,
        format!("ISE(x1 - r): vdp_q10 {q10:.4e} < vdp_q1 {q1:.4e}"),
    ))
}

fn convexity_probe() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in BUILTIN_NAMES {
        let p = builtin_problem(name)?;
        let g = grid_for(&p, 500)?;
        let traj = solve(&p, &g)?.trajectory;
        let probe = optimality_probe(&traj, &p, &g, 100, 42)?;
        pass &= probe.success;
        parts.push(format!("{name}: min dJ {:+.2e}", probe.min_delta));
    }
    Ok(Verdict::new(
        pass,
        format!("{} (>= -1e-8)", parts.join("; ")),
    ))
}

fn scaling_gaps(base: &Synthesis, scaled: &Synthesis, c: f64) -> (f64, f64) {
    let (a, b) = (&base.trajectory, &scaled.trajectory);
    let (sa, sb) = (&base.schedule, &scaled.schedule);
    let unchanged = [
        (&a.x - &b.x).amax() / a.x.amax().max(1.0),
        (&a.u - &b.u).amax() / a.u.amax().max(1.0),
        max_gap(&sa.k, &sb.k, 1.0),
        (&sa.l - &sb.l).amax() / sa.l.amax().max(1.0),
    ];
    let scaled_by_c = [
        (&a.lam * c - &b.lam).amax() / (c * a.lam.amax()).max(1.0),
        max_gap(&sa.p, &sb.p, c) / c.max(1.0),
        (&sa.z * c - &sb.z).amax() / (c * sa.z.amax()).max(1.0),
    ];
    (
        unchanged.iter().copied().fold(0.0, f64::max),
        scaled_by_c.iter().copied().fold(0.0, f64::max),
    )
}

fn scaling() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["mass_spring", "vdp_q1"] {
        let p = builtin_problem(name)?;
        let g = grid_for(&p, 500)?;
        let base = synthesize(&p, &g)?;
        for c in [0.5, 10.0] {
            let scaled = synthesize(&p.with_cost_scaled(c)?, &g)?;
            let (same, times_c) = scaling_gaps(&base, &scaled, c);
            pass &= same <= 1e-9 && times_c <= 1e-9;
            parts.push(format!(
                "{name} c={c}: x,u,K,l {same:.1e}, lam,P,z {times_c:.1e}"
            ));
        }
    }
    Ok(Verdict::new(
        pass,
        format!("{} (<= 1e-9)", parts.join("; ")),
    ))
}

fn fractional_cost() -> Result<Verdict> {
    let g = Grid::new(3.0, 300)?;
    let mut trap_err = 0.0f64;
    for f in [
        g.nodes()
            .iter()
            .map(|t| (2.0 * t).sin() * t.exp())
            .collect::<Vec<_>>(),
        g.nodes().iter().map(|t| 1.0 / (1.0 + t * t)).collect(),
        (0..g.len())
            .map(|k| ((k * 7919) % 13) as f64 - 6.0)
            .collect(),
    ] {
        let trap = g.trapezoid(&f);
        trap_err = trap_err
            .max((rl_integral(&f, FractionalOrder::ONE, &g)? - trap).abs() / trap.abs().max(1.0));
    }
    let p = builtin_problem("vdp_q1")?;
    let pg = grid_for(&p, 500)?;
    let classical = solve(&p, &pg)?.trajectory.cost;
    let fractional = solve(&p.with_cost_order(order(0.99)?), &pg)?
        .trajectory
        .cost;
    let change = rel(fractional, classical);
    Ok(Verdict::new(
        trap_err <= 1e-12 && change < 0.05,
        format!("rl vs trapezoid {trap_err:.1e} (<= 1e-12); vdp_q1 cost change at alpha1=0.99 {change:.2e} (< 5e-2)"),
    ))
}

type Check = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("fractional kernel", kernel),
        ("classical reduction at alpha=1", classical_reduction),
        ("dual-path optimum", dual_path),
        ("optimality conditions", optimality_conditions),
        ("closed-loop law", closed_loop_law),
        ("affine costate structure", affine_structure),
        ("heavier state weight tracks better", qualitative_claim),
        ("convexity probe", convexity_probe),
        ("cost scaling invariance", scaling),
        ("fractional cost option", fractional_cost),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {}: {}",
            if verdict.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            verdict.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
