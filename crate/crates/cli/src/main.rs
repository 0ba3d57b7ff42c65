//! `m2ch` — command-line front end for the two-component peakon toolkit.
//!
//! Subcommands:
//!
//! * `simulate <config>` — run a scenario file and write CSV artifacts,
//! * `closed-form --s <v> [--t0 --t1 --dt]` — print the antisymmetric
//!   closed-form solution as CSV on stdout,
//! * `verify [--suite <name>]` — run the invariant suites and report
//!   pass/fail,
//! * `version` — print the version.
//!
//! Output directory resolution for `simulate`: `--out`, else the
//! `M2CH_OUT_DIR` environment variable, else `./m2ch-out`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error,
//! 3 solver abort.

// Validation deliberately writes `!(a < b)`: unlike `a >= b`, it also fails
// when either side is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;
mod run;
mod scenario;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use m2ch_core::closed_form::classify;

use crate::output::fmt_f64;

#[derive(Parser)]
#[command(name = "m2ch", version, about = "Two-component peakon simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and write the CSV artifacts.
    Simulate {
        /// Path to the scenario file (flat key = value format, see README).
        config: PathBuf,
        /// Output directory (default: $M2CH_OUT_DIR, else ./m2ch-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the collision-centered antisymmetric closed form as CSV.
    ClosedForm {
        /// Density amplitude s >= 0 of the antisymmetric case.
        #[arg(long)]
        s: f64,
        /// Start time.
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        t0: f64,
        /// End time.
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        t1: f64,
        /// Sampling step.
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Run the invariant suites and print a pass/fail report.
    Verify {
        /// One of: core, dynamics, closed-form, lagrangian, all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Print the version.
    Version,
}

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER_ABORT: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Simulate { config, out } => simulate(&config, out),
        Cmd::ClosedForm { s, t0, t1, dt } => closed_form(s, t0, t1, dt),
        Cmd::Verify { suite } => run_verify(&suite),
        Cmd::Version => {
            println!("m2ch {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("M2CH_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("m2ch-out"))
}

fn simulate(config: &PathBuf, out: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let sc = match scenario::parse_scenario(&text) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("invalid scenario {}: {e}", config.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let dir = out_dir(out);
    match run::run(&sc, &dir) {
        Ok(()) => {
            println!("wrote artifacts to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_SOLVER_ABORT)
        }
    }
}

fn closed_form(s: f64, t0: f64, t1: f64, dt: f64) -> ExitCode {
    if !(dt > 0.0) || !(t1 > t0) {
        eprintln!("need t1 > t0 and dt > 0");
        return ExitCode::from(EXIT_USAGE);
    }
    let case = match classify(s) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    println!("t,q,p,u_peak,rho_bar_peak");
    for k in 0..=steps {
        let t = t0 + dt * k as f64;
        let pt = case.eval_collision_centered(t);
        if pt.p_is_infinite() {
            continue;
        }
        println!(
            "{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(pt.q),
            fmt_f64(pt.p),
            fmt_f64(pt.u_peak),
            fmt_f64(pt.rho_bar_peak)
        );
    }
    ExitCode::SUCCESS
}

fn run_verify(suite: &str) -> ExitCode {
    if !["core", "dynamics", "closed-form", "lagrangian", "all"].contains(&suite) {
        eprintln!("unknown suite `{suite}`; use core, dynamics, closed-form, lagrangian or all");
        return ExitCode::from(EXIT_USAGE);
    }
    let rep = verify::verify(suite);
    print!("{}", rep.render());
    if rep.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    }
}
