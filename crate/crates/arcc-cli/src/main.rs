//! `arcc`: simulation, identification, tuning, and benchmark runner for the
//! active compliant-wrist toolkit. Every command writes its outputs under a
//! directory together with the fully resolved configuration and a manifest,
//! so any result can be reproduced from the files alone.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Process-level failure with the documented exit code.
#[derive(Debug)]
pub enum AppError {
    /// Bad flags, config file, or preset name (exit 1).
    Config(String),
    /// Simulation divergence or I/O trouble while running (exit 2).
    Runtime(String),
    /// A `--check` verification did not hold (exit 3).
    Check(String),
}

impl AppError {
    pub fn config(msg: impl fmt::Display) -> Self {
        AppError::Config(msg.to_string())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        AppError::Runtime(msg.to_string())
    }

    pub fn check(msg: impl fmt::Display) -> Self {
        AppError::Check(msg.to_string())
    }

    pub fn code(&self) -> i32 {
        match self {
            AppError::Config(_) => 1,
            AppError::Runtime(_) => 2,
            AppError::Check(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Runtime(m) => write!(f, "runtime error: {m}"),
            AppError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

/// Sorts toolkit errors into exit classes: numerical blow-ups are runtime
/// failures, everything else points at the configuration.
pub fn map_arcc(e: arcc::Error) -> AppError {
    match e {
        arcc::Error::SimulationDiverged { .. } => AppError::runtime(e),
        other => AppError::config(other),
    }
}

pub fn warn(msg: impl fmt::Display) {
    eprintln!("warning: {msg}");
}

#[derive(Parser)]
#[command(
    name = "arcc",
    version,
    about = "Active compliant-wrist simulation and benchmarking toolkit",
    after_help = config::preset_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override file values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Named preset (see the list below --help)
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory (default: out)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base random seed (default: 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Verify the acceptance-tagged properties of the outputs; exit 3 on failure
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write per-run results and trajectories
    Simulate(CommonArgs),
    /// Estimate a transfer function from signal CSVs or a built-in round trip
    Identify {
        #[command(flatten)]
        common: CommonArgs,
        /// Generate sweep data through a known model and identify it back
        #[arg(long)]
        self_test: bool,
        /// Excitation signal CSV (t,value)
        #[arg(long, value_name = "FILE", requires = "input_y")]
        input_u: Option<PathBuf>,
        /// Response signal CSV (t,value)
        #[arg(long, value_name = "FILE", requires = "input_u")]
        input_y: Option<PathBuf>,
        /// Denominator order of the estimated model (1 or 2)
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Numerator order of the estimated model
        #[arg(long, default_value_t = 0)]
        zeros: usize,
    },
    /// Search the closed-loop gain limits and suggest safe operating gains
    Tune(CommonArgs),
    /// Run the comparative benchmark suite over all tool configurations
    Bench(CommonArgs),
    /// Write frequency-response tables for the preset models
    Bode(CommonArgs),
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(common) => commands::simulate(&common),
        Command::Identify {
            common,
            self_test,
            input_u,
            input_y,
            order,
            zeros,
        } => commands::identify(&common, self_test, input_u, input_y, order, zeros),
        Command::Tune(common) => commands::tune(&common),
        Command::Bench(common) => commands::bench(&common),
        Command::Bode(common) => commands::bode(&common),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code());
        }
    }
}
