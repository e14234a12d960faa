//! `trendlab`: batch front end for the search-volume surprise backtester.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 engine error. Failures are
//! reported on stderr as a single JSON object.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use trendlab_core::{Error, ErrorClass, StrategyConfig, TiePolicy};

#[derive(Debug, Parser)]
#[command(name = "trendlab", version, about = "Search-volume surprise backtests and the checks that keep them honest")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Backtest one search series against daily prices.
    Backtest(BacktestArgs),
    /// t statistics for every baseline length in a range.
    Sweep(SweepArgs),
    /// Null study: the strategy driven by pure-noise search series.
    Nullcheck(NullArgs),
    /// Partition keyword fixtures by whether they were known before a date.
    Keywords(KeywordArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieArg {
    Reference,
    Deadband,
}

#[derive(Debug, Args)]
struct StrategyArgs {
    /// Baseline length in weeks.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value_t = TieArg::Reference)]
    tie_policy: TieArg,
    /// Dead band in SVI points (deadband policy only).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Trade momentum instead of reversal.
    #[arg(long)]
    invert: bool,
    /// Cost per trade in basis points.
    #[arg(long, default_value_t = 2.0)]
    cost_bps: f64,
}

impl StrategyArgs {
    fn config(&self) -> StrategyConfig {
        StrategyConfig {
            k: self.k,
            tie_policy: match self.tie_policy {
                TieArg::Reference => TiePolicy::Reference,
                TieArg::Deadband => TiePolicy::Deadband,
            },
            epsilon: self.epsilon,
            invert: self.invert,
            cost_bps: self.cost_bps,
            ..StrategyConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct SeedArg {
    /// Master seed; every random draw is derived from it.
    #[arg(long, env = "TRENDLAB_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BacktestArgs {
    /// Weekly search CSV (`week_start,value`).
    #[arg(long)]
    svi: PathBuf,
    /// Daily price CSV (`date,close`).
    #[arg(long)]
    prices: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Also report separate in-sample and out-of-sample results, split at
    /// the first Monday on or after DATE.
    #[arg(long, value_name = "DATE")]
    split: Option<NaiveDate>,
    /// Keyword fixture file used to check when the keyword became known.
    #[arg(long, requires = "keyword")]
    keywords: Option<PathBuf>,
    /// Keyword this search series belongs to.
    #[arg(long)]
    keyword: Option<String>,
    /// Run even if the keyword was chosen after the backtest start; outputs are watermarked.
    #[arg(long)]
    allow_anachronistic: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    svi: PathBuf,
    #[arg(long)]
    prices: PathBuf,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 30)]
    k_max: usize,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NullArgs {
    /// Daily prices to score against; iid Gaussian weekly returns when omitted.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Length of the synthetic return series.
    #[arg(long, default_value_t = 480)]
    weeks: usize,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KeywordArgs {
    /// Fixture CSV (`keyword,category,source_url,availability_date`); the
    /// bundled lists when omitted.
    fixtures: Option<PathBuf>,
    /// Backtest start date.
    #[arg(long)]
    start: NaiveDate,
    /// Also write `gate.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Engine => 3,
    }
}

fn report(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("Usage", e.to_string().trim(), 1),
    };
    let outcome = match cli.command {
        Command::Backtest(a) => commands::backtest(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Nullcheck(a) => commands::nullcheck(a),
        Command::Keywords(a) => commands::keywords(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), &e.to_string(), exit_code(e.class())),
    }
}

pub(crate) type CliResult = Result<(), Error>;
