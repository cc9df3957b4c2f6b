//! Command-line front end: dataset generation, fitting, derivative checks and
//! Monte Carlo studies.
//!
//! Exit codes: 0 success, 1 internal failure or failed bands, 2 non-convergence,
//! 3 configuration, usage or parse error.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

use error::{CliError, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "mlp-logdet", version, about = "Log-determinant estimation of multidimensional MLP regressions")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset and its truth file from a config.
    Generate {
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit an MLP to a dataset CSV.
    Fit(commands::fit::FitArgs),
    /// Compare analytic derivatives with finite differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Run the Monte Carlo study described by a config.
    Montecarlo {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Generate { config, out_dir } => {
            let dir = commands::generate::run(config, out_dir.as_deref())?;
            println!("wrote {}", dir.display());
            Ok(EXIT_OK)
        }
        Command::Fit(args) => commands::fit::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Montecarlo { config, out_dir } => commands::montecarlo::run(config, out_dir.as_deref()),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
