//! phasedamp: simulate N-level systems under phase-damping noise and
//! reconstruct their initial density matrices from expectation-value
//! time series.
//!
//! Four subcommands cover the workflow end to end: `simulate` evolves a
//! given initial state and writes its measurement record, `reconstruct`
//! inverts such a record back into a state report, `roundtrip` chains
//! the two over seeded random states and scores the recovery, and
//! `validate` checks a rate configuration against the channel validity
//! conditions. Identical configuration and seed produce byte-identical
//! output files, except for the timestamp confined to the sidecar.

mod config;
mod failure;
mod reconstruct;
mod roundtrip;
mod simulate;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigArgs, ExperimentConfig};
use failure::Failure;

#[derive(Parser)]
#[command(
    name = "phasedamp",
    version,
    about = "Phase-damping channel simulation and density-matrix reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurement time series for a given initial state
    Simulate(SimulateArgs),
    /// Invert a measurement CSV back into a density matrix report
    Reconstruct(ReconstructArgs),
    /// Run seeded random states through simulate and reconstruct, and
    /// score the recovery
    Roundtrip(RoundtripArgs),
    /// Check a rate configuration against the channel validity conditions
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Initial density matrix JSON file
    #[arg(long, value_name = "FILE")]
    state: PathBuf,

    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Measurement CSV produced by simulate
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Ground-truth state JSON; adds a trace_distance field to the report
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,

    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct RoundtripArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Rates JSON file to check
    #[arg(long, value_name = "FILE")]
    rates: PathBuf,

    /// Expected dimension, cross-checked against the file
    #[arg(long)]
    dim: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = ExperimentConfig::resolve(&args.config)?;
            simulate::run(&cfg, &args.state)
        }
        Command::Reconstruct(args) => {
            let cfg = ExperimentConfig::resolve(&args.config)?;
            reconstruct::run(&cfg, &args.data, args.truth.as_deref())
        }
        Command::Roundtrip(args) => {
            let cfg = ExperimentConfig::resolve(&args.config)?;
            roundtrip::run(&cfg)
        }
        Command::Validate(args) => validate::run(&args.rates, args.dim),
    }
}
