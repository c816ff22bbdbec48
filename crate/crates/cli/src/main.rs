//! `ergocap`: capacities and optimal transmit covariances of ergodic MIMO
//! Gaussian channels from the command line.
//!
//! Exit codes: 0 success (including non-converged optimizations, flagged in
//! the output), 2 usage or descriptor error, 3 infeasible, 4 numerical failure.

mod args;
mod commands;
mod error;
mod figures;
mod output;

use clap::{Parser, Subcommand};

use crate::commands::{BeamformArgs, OptimizeArgs, WaterfillArgs};
use crate::error::CliError;
use crate::figures::FiguresArgs;

#[derive(Parser, Debug)]
#[command(
    name = "ergocap",
    version,
    about = "Ergodic MIMO capacity and transmit covariance solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Space-time water-filling on an eigenvalue density.
    Waterfill(WaterfillArgs),
    /// Optimal transmit covariance for a channel law.
    Optimize(OptimizeArgs),
    /// Beamforming optimality: one instance or the 2×2 boundary.
    Beamform(BeamformArgs),
    /// Data table for one plot.
    Figures(FiguresArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Waterfill(a) => commands::cmd_waterfill(&a),
        Command::Optimize(a) => commands::cmd_optimize(&a),
        Command::Beamform(a) => commands::cmd_beamform(&a),
        Command::Figures(a) => figures::cmd_figures(&a),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
