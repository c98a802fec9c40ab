//! `radkernel`: batch front-end for kernel identification.
//!
//! Exit codes: 0 success, 1 verify failure, 2 configuration, 3 IO,
//! 4 degeneracy, 5 solvability, 6 non-convergence.

mod commands;
mod config;
mod csvio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radkernel::Exec;

use crate::commands::Context;
use crate::config::{parse_method, parse_sweep, RunConfig};

/// Environment variable with the worker count. `1` runs everything sequentially.
pub const WORKERS_ENV: &str = "RADKERNEL_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] radkernel::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use radkernel::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                E::Degeneracy { .. } | E::Solver(_) => 4,
                E::Solvability { .. } => 5,
                E::NonConvergence { .. } => 6,
                E::Shape { .. } | E::Config(_) | E::Admissibility { .. } | E::UnsupportedFamily(_) | E::Data(_) => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "radkernel", version, about = "Identify radial memory kernels from boundary and averaged data")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides io.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the data of a preset problem: u, f_tilde, g, lambda, k_true.
    Manufacture,
    /// Recover k from data files or a preset.
    Identify {
        /// time_march | picard (overrides solver.method).
        #[arg(long)]
        method: Option<String>,
        /// Grid sizes for a convergence sweep, e.g. n_r=16,32,64.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Run the invariant suite; exit 1 if any check fails.
    Verify {
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Admissibility and trace report for the configured coefficients.
    CoeffReport,
}

fn workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{s}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let workers = workers()?;
    #[cfg(feature = "parallel")]
    {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let exec = if workers > 1 { Exec::Parallel } else { Exec::Sequential };
    let (config, explicit) = match &cli.config {
        Some(p) => (RunConfig::load(p)?, true),
        None => (RunConfig::default(), false),
    };
    let out = cli.out.clone().or_else(|| config.io.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context { config, explicit, out, exec, workers };
    match cli.command {
        Command::Manufacture => commands::manufacture(&ctx).map(|_| true),
        Command::Identify { method, sweep } => {
            let method = method.as_deref().map(parse_method).transpose()?;
            let sweep = sweep.as_deref().map(parse_sweep).transpose()?;
            commands::identify_cmd(&ctx, method, sweep).map(|_| true)
        }
        Command::Verify { sweep } => {
            let sweep = sweep.as_deref().map(parse_sweep).transpose()?;
            commands::verify(&ctx, sweep)
        }
        Command::CoeffReport => commands::coeff_report(&ctx).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
