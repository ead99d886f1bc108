//! `eqdrift` command-line tool.
//!
//! Subcommands:
//! - `factor`: volatility matrix from a covariance matrix, with implied row sums
//! - `weights`: equal-driver-exposure weights next to the 1/n benchmark
//! - `simulate`: Monte Carlo terminal wealth of both strategies
//! - `figure1`: optimal terminal-wealth densities for several market sizes
//! - `backtest`: rolling out-of-sample backtest on a daily return panel
//! - `compare`: Sharpe ratios and the Jobson-Korkie-Memmel test for two return series
//! - `synth`: daily return panel simulated from the model
//!
//! All outputs go to `--out-dir` (or `EQDRIFT_OUT_DIR`) and are written only
//! after every computation has succeeded. See `error::code` for exit codes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "eqdrift",
    version,
    about = "Equal-drift portfolio tools: factorizations, weights, simulation, backtests"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory for output files.
    #[arg(
        long,
        global = true,
        env = "EQDRIFT_OUT_DIR",
        default_value = "eqdrift-out"
    )]
    pub out_dir: PathBuf,

    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// No summary on stdout.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Factor a covariance matrix and report implied row sums.
    Factor(FactorArgs),
    /// Equal-driver-exposure weights and the 1/n benchmark.
    Weights(WeightsArgs),
    /// Simulate terminal wealth of the optimal and 1/n strategies.
    Simulate(SimulateArgs),
    /// Optimal terminal-wealth densities on a common grid.
    Figure1(Figure1Args),
    /// Rolling-sample backtest against 1/n.
    Backtest(BacktestArgs),
    /// Compare the Sharpe ratios of two daily return series.
    Compare(CompareArgs),
    /// Write a daily return panel simulated from the model.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cholesky,
    #[value(alias = "sym-sqrt", alias = "sym_sqrt")]
    Sqrt,
    Rotate,
}

#[derive(Args)]
pub struct VolArgs {
    /// Covariance matrix CSV, one row per line, no header.
    #[arg(long, required_unless_present = "vol", conflicts_with = "vol")]
    pub cov: Option<PathBuf>,

    /// Volatility matrix CSV, used as given.
    #[arg(long)]
    pub vol: Option<PathBuf>,

    /// How to factor --cov.
    #[arg(long, value_enum, default_value_t = Method::Sqrt)]
    pub method: Method,

    /// Target matrix CSV for --method rotate.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Args)]
pub struct FactorArgs {
    #[command(flatten)]
    pub vol: VolArgs,
}

#[derive(Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub vol: VolArgs,

    /// Total risky exposure of the fully-invested weights.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub exposure: f64,

    /// Use this kappa = (lambda - r) / (mu - r) instead of an exposure target.
    #[arg(long, conflicts_with = "exposure")]
    pub kappa: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub vol: VolArgs,

    /// Drift of every Brownian driver (per year).
    #[arg(long, default_value_t = 0.2)]
    pub mu: f64,

    /// Risk-free rate (per year).
    #[arg(long, default_value_t = 0.03)]
    pub r: f64,

    /// Target expected growth rate of wealth (per year).
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,

    /// Initial wealth.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,

    /// Horizon in years.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,

    #[arg(long, default_value_t = 252)]
    pub steps: usize,

    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
}

#[derive(Args)]
pub struct Figure1Args {
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,

    #[arg(long, default_value_t = 0.2)]
    pub mu: f64,

    #[arg(long, default_value_t = 0.03)]
    pub r: f64,

    #[arg(long, default_value_t = 1.0)]
    pub w: f64,

    #[arg(long, default_value_t = 1.0)]
    pub t: f64,

    /// Market sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 5, 25])]
    pub n: Vec<usize>,

    /// Grid points.
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PanelFormat {
    Auto,
    Csv,
    French,
}

#[derive(Args)]
pub struct BacktestArgs {
    /// Daily returns: generic CSV (`date,<assets>`, decimals) or a French data-library file (percent).
    pub returns: PathBuf,

    /// `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<PanelFormat>,

    /// Estimation window in trading days [default: 1260].
    #[arg(long)]
    pub window: Option<usize>,

    /// Re-estimate every this many trading days [default: 20].
    #[arg(long)]
    pub every: Option<usize>,

    /// Factorization of each estimate [default: sqrt].
    #[arg(long, value_enum)]
    pub method: Option<Method>,

    /// Target matrix CSV for --method rotate.
    #[arg(long)]
    pub target: Option<PathBuf>,

    /// Total risky exposure [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    pub exposure: Option<f64>,

    /// Annual risk-free rate [default: 0.03].
    #[arg(long)]
    pub rf: Option<f64>,

    /// Date range left out of estimation, START-END (repeatable) [default: 19871019-19871023].
    #[arg(long)]
    pub exclude: Vec<eqdrift::data::DateRange>,

    /// Estimate on every row.
    #[arg(long, conflicts_with = "exclude")]
    pub no_exclusions: bool,

    /// Diagonal shrinkage delta for singular estimates.
    #[arg(long)]
    pub shrinkage: Option<f64>,

    /// Asset to drop (repeatable).
    #[arg(long)]
    pub drop: Vec<String>,

    /// Restrict the panel to START-END.
    #[arg(long)]
    pub range: Option<eqdrift::data::DateRange>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// First return CSV (`date,<columns>`).
    #[arg(long)]
    pub first: PathBuf,

    /// Column of the first file [default: first column].
    #[arg(long)]
    pub first_column: Option<String>,

    /// Second return CSV.
    #[arg(long)]
    pub second: PathBuf,

    #[arg(long)]
    pub second_column: Option<String>,

    /// Annual risk-free rate subtracted from both series.
    #[arg(long, default_value_t = 0.03)]
    pub rf: f64,
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub vol: VolArgs,

    #[arg(long, default_value_t = 0.2)]
    pub mu: f64,

    #[arg(long, default_value_t = 0.03)]
    pub r: f64,

    /// Trading days to simulate.
    #[arg(long, default_value_t = 2520)]
    pub days: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
