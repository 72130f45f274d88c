//! `nambu` — batch front door for the triple-bracket engine.
//!
//! Two subcommands:
//!
//! * `simulate --config <json> --out <csv>` integrates one configured
//!   trajectory, writes a CSV of conserved-quantity diagnostics per sample,
//!   and a JSON sidecar with the drift maxima.
//! * `verify <suite> --seed <int> [--dim <d>]` runs seeded property suites
//!   and prints a fixed-order pass/fail table.
//!
//! Exit codes are a stable contract: `0` success, `1` verification failure,
//! `2` usage or config error, `3` numerical divergence.

mod config;
mod simulate;
mod verify;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nambu", version, about = "Triple-bracket trajectory runner and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the trajectory described by a JSON config and export CSV
    /// diagnostics plus a JSON drift summary.
    Simulate {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Path of the CSV to write; the drift summary goes to
        /// `<out>.summary.json`. Overrides the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded verification suite and print its pass/fail table.
    Verify {
        /// Which suite to run.
        #[arg(value_enum)]
        suite: Suite,
        /// Seed for every random draw in the suite (ChaCha8 streams).
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Override the metric dimension where a suite supports it
        /// (casimir and antisymmetry; others have fixed geometry).
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Suite {
    Casimir,
    Antisymmetry,
    Separation,
    Spectral,
    Dirac,
    All,
}

/// Failures that decide the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, unparsable, or semantically invalid configuration.
    #[error("config error: {0}")]
    Config(String),
    /// The integrator hit the per-entry divergence cap.
    #[error("divergence: {0}")]
    Divergence(String),
    /// Output could not be written.
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out } => match simulate::run(&config, out.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => {
                eprintln!("{err}");
                ExitCode::from(err.exit_code())
            }
        },
        Command::Verify { suite, seed, dim } => match verify::run(suite, seed, dim) {
            Ok(all_passed) => {
                if all_passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(err) => {
                eprintln!("{err}");
                ExitCode::from(err.exit_code())
            }
        },
    }
}
