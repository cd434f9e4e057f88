use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gkdv::config::{load_config, Experiment, RunConfig};
use gkdv::runner::run;
use gkdv::Error;

#[derive(Parser)]
#[command(name = "gkdv", version, about = "Generalized KdV solver on the half-line with energy-estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Do not print the summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory, energy CSV and estimate report.
    Solve(Common),
    /// Distances to the eps = 0 run over a decreasing list of eps.
    EpsSweep(Common),
    /// Growth of a small perturbation against the uniqueness rate bound.
    Gronwall(Common),
    /// Convergence against the exact traveling wave.
    SolitonBench(Common),
    /// Convergence against a manufactured solution.
    Mms(Common),
    /// Randomized check of the interpolation inequalities.
    CheckIneq(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Solve(c) => (Experiment::Solve, c),
        Command::EpsSweep(c) => (Experiment::EpsSweep, c),
        Command::Gronwall(c) => (Experiment::Gronwall, c),
        Command::SolitonBench(c) => (Experiment::SolitonBench, c),
        Command::Mms(c) => (Experiment::Mms, c),
        Command::CheckIneq(c) => (Experiment::CheckIneq, c),
    };
    let mut cfg = match &common.config {
        Some(p) => match load_config(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("gkdv: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        },
        None => RunConfig::default(),
    };
    // The subcommand decides what runs.
    cfg.experiment = experiment;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out));
    if let Some(o) = out.to_str() {
        cfg.out = o.to_string();
    }
    match run(&cfg, &out) {
        Ok(outcome) => {
            if !common.quiet {
                print!("{}", outcome.summary);
            }
            ExitCode::from(if outcome.pass { 0 } else { 3 })
        }
        Err(e) => {
            eprintln!("gkdv: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_solver_failure() {
        2
    } else {
        1
    }
}
