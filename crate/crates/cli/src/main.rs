use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;

/// Traveling waves for reaction-diffusion-advection equations with
/// discontinuous coefficients.
///
/// Exit codes: 0 success, 1 usage error, 2 invalid model, 3 numerical
/// failure, 4 refused operation.
#[derive(Debug, Parser)]
#[command(name = "twave", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for the JSON report and CSV tables. Without it the report
    /// goes to stdout and no CSV is written.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print nothing to stdout and suppress warnings on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing hypotheses and print the derived averages.
    Validate { model: PathBuf },
    /// Bounds on the minimal speed.
    Bounds { model: PathBuf },
    /// Analytic existence certificate at one speed.
    Certify {
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
    },
    /// Solve the first-order problem at one speed.
    Solve {
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
    },
    /// Bisect for the minimal speed.
    Speed {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Reconstruct the wave profile at an admissible speed.
    Profile {
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        /// Number of uniform z samples.
        #[arg(long, default_value_t = 2048, value_parser = clap::value_parser!(u32).range(2..))]
        grid: u32,
    },
    /// Regularization sweep over a ladder of ε.
    RegSweep {
        model: PathBuf,
        /// Comma-separated ε values; defaults to ε̄/2^k, k = 1..10.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        eps: Vec<f64>,
        /// Speed for the drift functional and the solution distances.
        #[arg(long, allow_negative_numbers = true)]
        c: Option<f64>,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
