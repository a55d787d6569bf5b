//! Command-line front end: problem files, commands and result files.

mod commands;
mod output;
mod problem_file;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, Check, RunReport};
pub use output::{
    fmt_f64, read_gains, to_json, write_gains, write_json, write_simulation, write_table,
    write_trajectory,
};
pub use problem_file::{
    load_problem, write_problem, MatrixSpec, Overrides, PlantSpec, ProblemFile, ReferenceSpec,
    WeightsSpec, DEFAULT_STEPS,
};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "fotrack",
    version,
    about = "Closed-loop optimal control for fractional-order tracking problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Open-loop optimum: trajectory.csv and report.json.
    Solve(CommonArgs),
    /// Gain synthesis: gains.csv, trajectory.csv and report.json.
    Gains(CommonArgs),
    /// Closed-loop rollout under a gain schedule: closed_loop.csv and report.json.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// gains.csv from a previous `gains` run; synthesized afresh if absent.
        #[arg(long)]
        gains: Option<PathBuf>,
        /// Initial state override, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Oracle cross-checks and optimality probe; exit code 3 on failure.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Multiplies every tolerance.
        #[arg(long)]
        tol_override: Option<f64>,
    },
    /// Repeats `gains` over lists of orders and Q scalings.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        alpha_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        q_scale_list: Option<Vec<f64>>,
    },
    /// Prints the builtin problems.
    ListProblems,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Builtin name or path to a problem file.
    #[arg(long)]
    pub problem: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Number of grid steps N (overrides the file).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Fractional order (overrides the file).
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Exit codes: 0 success, 1 input error, 2 solver failure, 3 verification failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver { .. }
        | Error::NoConvergence { .. }
        | Error::Synthesis { .. }
        | Error::Stepping { .. } => 2,
        Error::Verification(_) => 3,
        _ => 1,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Input("x".into())), 1);
        assert_eq!(exit_code(&Error::Weights("x".into())), 1);
        assert_eq!(
            exit_code(&Error::Solver {
                message: "x".into(),
                condition: 1e15
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::NoConvergence {
                iterations: 50,
                last_change: 1.0
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::Synthesis {
                node: 3,
                condition: 1e12
            }),
            2
        );
        assert_eq!(exit_code(&Error::Verification("x".into())), 3);
    }

    #[test]
    fn argument_errors_exit_one() {
        assert_eq!(main_with_args(["fotrack", "solve"]), 1);
        assert_eq!(main_with_args(["fotrack", "frobnicate"]), 1);
        assert_eq!(main_with_args(["fotrack", "list-problems"]), 0);
    }

    #[test]
    fn unknown_problem_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            main_with_args(["fotrack", "solve", "--problem", "nope", "--out", out]),
            1
        );
    }
}
