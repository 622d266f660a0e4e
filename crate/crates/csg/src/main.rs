//! Command-line front end for the experiment harness.
//!
//! `csg run <config-file>` executes a JSON experiment plan, `csg reproduce
//! <fig-id>` regenerates one of the bundled figure studies, and `csg
//! selftest` runs the built-in invariant checks. Exit code 0 on success,
//! 1 on any error (including failed selftest checks).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csg::harness::{figure_config, run_experiment, run_selftest, ExperimentConfig, FigureId};
use csg::harness::{ExperimentResult, OptimizerResult};

#[derive(Parser)]
#[command(
    name = "csg",
    version,
    about = "Continuous stochastic gradient experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON plan file.
    Run {
        /// Path to the experiment plan (JSON).
        config_file: PathBuf,
    },
    /// Regenerate the data of one bundled figure study.
    Reproduce {
        /// Figure identifier: fig1, fig2, fig3, fig4, or fig5.
        fig_id: FigureId,
        /// Number of replications (default 1000).
        #[arg(long)]
        reps: Option<usize>,
        /// Iteration budget per replication (default: the figure's own).
        #[arg(long)]
        iters: Option<u64>,
        /// Output directory (default out/<fig-id>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> csg::Result<()> {
    match command {
        Command::Run { config_file } => {
            let text = std::fs::read_to_string(&config_file)?;
            let config = ExperimentConfig::from_json(&text)?;
            let result = run_experiment(&config)?;
            report(&result);
            Ok(())
        }
        Command::Reproduce {
            fig_id,
            reps,
            iters,
            out,
        } => {
            let config = figure_config(fig_id, reps, iters, out)?;
            eprintln!(
                "reproducing {fig_id}: {} x {} replications x {} iterations",
                config.optimizers.len(),
                config.replications,
                config.iterations
            );
            let result = run_experiment(&config)?;
            report(&result);
            Ok(())
        }
        Command::Selftest => run_selftest(),
    }
}

/// Prints a per-optimizer closing summary of a finished experiment.
fn report(result: &ExperimentResult) {
    let config = &result.config;
    println!(
        "experiment '{}': {} optimizer(s), {} replication(s), {} iteration(s)",
        config.name,
        config.optimizers.len(),
        config.replications,
        config.iterations
    );
    if let Some(dir) = &config.outputs {
        println!("outputs: {}", dir.display());
    }
    let tol_headers: Vec<String> = config
        .tolerances
        .iter()
        .map(|tol| format!("steps<{tol}"))
        .collect();
    println!(
        "{:<28} {:>12} {:>8}  {}",
        "optimizer",
        "median err",
        "failed",
        tol_headers.join("  ")
    );
    for opt in &result.optimizers {
        println!("{}", optimizer_line(opt, &tol_headers));
    }
}

fn optimizer_line(opt: &OptimizerResult, tol_headers: &[String]) -> String {
    let median = opt
        .quantiles
        .last()
        .map_or_else(|| "-".to_string(), |q| format!("{:.3e}", q.q50));
    let steps: Vec<String> = opt
        .steps_to_tolerance
        .iter()
        .zip(tol_headers)
        .map(|((_, steps), header)| {
            let cell = steps.map_or_else(|| "-".to_string(), |n| n.to_string());
            format!("{cell:>width$}", width = header.len())
        })
        .collect();
    format!(
        "{:<28} {:>12} {:>8}  {}",
        opt.name,
        median,
        opt.failed_replications.len(),
        steps.join("  ")
    )
}
