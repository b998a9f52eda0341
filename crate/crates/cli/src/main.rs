//! `simplexdyn`: runs matrix analyses, simulations, verification suites and
//! ternary plots from JSON config files.
//!
//! Exit codes: 0 ok, 1 i/o error, 2 parse error, 3 dimension error,
//! 4 simulation error, 5 verification failure.

mod commands;
mod config;
mod failure;
mod simulate;
mod ternary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "simplexdyn", version = config::VERSION, about = "Replicator dynamics and Brownian motion on the simplex")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Io {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose a payoff matrix and report its equilibria.
    MatrixAnalyze(Io),
    /// Write trajectory, ensemble, JKO or portrait CSVs.
    Simulate(Io),
    /// Run a verification suite; exits 5 if any gate fails.
    Verify(Io),
    /// Draw a trajectory, ensemble or portrait CSV of a 3-strategy game as SVG.
    Ternary(Io),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::MatrixAnalyze(io) => commands::matrix_analyze(&io.config, &io.out),
        Command::Simulate(io) => simulate::simulate(&io.config, &io.out),
        Command::Verify(io) => commands::verify(&io.config, &io.out),
        Command::Ternary(io) => ternary::ternary(&io.config, &io.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("simplexdyn: {f}");
            ExitCode::from(f.code())
        }
    }
}
