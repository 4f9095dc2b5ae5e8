//! `wreathmix`: CSV tables of exact and limiting mixing distances for the
//! colored top-m-to-random shuffle.

mod commands;
mod format;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wreathmix_core::Error;

/// Exit statuses.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CERTIFY: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

/// Environment variable overriding the enumeration cap.
pub const BUDGET_ENV: &str = "WREATHMIX_BUDGET";

#[derive(Debug, Parser)]
#[command(name = "wreathmix", version, about = "Mixing distances of colored top-m-to-random shuffles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Limiting cutoff profiles on a grid of window parameters c.
    Profile(ProfileArgs),
    /// Exact finite-n distances from uniform for a range of k.
    Exact(ExactArgs),
    /// Exact occupancy law after k rounds of m-subsets.
    Occupancy(OccupancyArgs),
    /// Certify the mixture formulas against brute-force convolution.
    OracleCheck(OracleArgs),
    /// Monte Carlo walks compared with the exact law of L_p.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    p: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = -2.0)]
    c_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
    c_max: f64,
    #[arg(long, default_value_t = 0.5)]
    c_step: f64,
    /// Exponents q for the H_q columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    /// Series truncation tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    m: usize,
    /// A single k; overrides the range.
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    k_min: usize,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    /// Scan for the first k with sep <= eps instead of tabulating.
    #[arg(long, conflicts_with_all = ["k", "k_min", "k_max"])]
    eps: Option<f64>,
    /// Render exact quantities as num/den.
    #[arg(long)]
    exact_rationals: bool,
    /// Largest denominator, in bits, before output stops.
    #[arg(long, default_value_t = commands::DEFAULT_MAX_BITS)]
    max_bits: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
pub struct OccupancyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    exact_rationals: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    m: usize,
    /// Largest k to certify (alias of --k).
    #[arg(long, alias = "k")]
    k_max: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
    q: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::usage(format!("csv: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Profile(a) => a.output.open().map_err(Failure::from).and_then(|w| commands::profile(a, w)),
        Command::Exact(a) => a.output.open().map_err(Failure::from).and_then(|w| commands::exact(a, w)),
        Command::Occupancy(a) => a.output.open().map_err(Failure::from).and_then(|w| commands::occupancy(a, w)),
        Command::OracleCheck(a) => a.output.open().map_err(Failure::from).and_then(|w| commands::oracle_check(a, w)),
        Command::Simulate(a) => a.output.open().map_err(Failure::from).and_then(|w| commands::simulate(a, w)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("wreathmix: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
