//! Batch front end for the margin-paths experiments.
//!
//! Exit codes: 0 when the run completed and its property verdict holds,
//! 2 when an experiment ran but the verdict is false, 1 on operational
//! errors (bad flags, unreadable inputs, solver failures).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{
    run_compare, run_decompose, run_gd, run_gen_data, run_margin_scaling, run_oscillate,
    run_regpath, run_validate_loss, CompareArgs, DecomposeArgs, GdArgs, GenDataArgs,
    MarginScalingArgs, OscillateArgs, RegpathArgs, ValidateLossArgs,
};

/// Gradient-descent and l2 regularization paths of linear classifiers.
#[derive(Debug, Parser)]
#[command(name = "margin-paths", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a dataset into its spanned and separable parts.
    Decompose(DecomposeArgs),
    /// Run gradient descent and record the iterate trace.
    Gd(GdArgs),
    /// Solve the constrained-minimizer path over a radius grid.
    Regpath(RegpathArgs),
    /// Compare gradient-descent and path directions at matched norms.
    Compare(CompareArgs),
    /// Fit the margin-versus-cluster-size scaling exponent.
    MarginScaling(MarginScalingArgs),
    /// Drive the alternating-tail loss whose path direction never settles.
    Oscillate(OscillateArgs),
    /// Sweep a loss over a grid checking its declared invariants.
    ValidateLoss(ValidateLossArgs),
    /// Generate a dataset CSV from a generator spec.
    GenData(GenDataArgs),
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Decompose(args) => run_decompose(args),
        Command::Gd(args) => run_gd(args),
        Command::Regpath(args) => run_regpath(args),
        Command::Compare(args) => run_compare(args),
        Command::MarginScaling(args) => run_margin_scaling(args),
        Command::Oscillate(args) => run_oscillate(args),
        Command::ValidateLoss(args) => run_validate_loss(args),
        Command::GenData(args) => run_gen_data(args),
    }
}

/// A failed descent step is a property violation witnessed mid-run, not an
/// operational error, so it shares the verdict-failure exit code.
fn verdict_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<margin_paths::Error>(),
            Some(margin_paths::Error::DescentViolation { .. })
        )
    })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(if verdict_error(&err) { 2 } else { 1 });
        }
    }
}
