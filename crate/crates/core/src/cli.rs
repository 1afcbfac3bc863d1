//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{error::ErrorKind, Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::backtest::{default_synthetic_inputs, run_backtest, run_synthetic, BacktestReport, SyntheticConfig, SyntheticErrors};
use crate::error::{DataError, Error};
use crate::forecast::make_forecast;
use crate::interp::TRADING_DAY;
use crate::market_data::{parse_history, OptionHistory};
use crate::solver::{reversed_heat_norm, SolverConfig, DEFAULT_ALPHA, DEFAULT_CG_REL_TOL, DEFAULT_NODES};
use crate::strategy::{decide, StrategyConfig, DEFAULT_CUTOFF};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Noise levels swept by `synth` when `--noise-delta` is not given.
pub const DEFAULT_NOISE_SWEEP: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Column header of the backtest report CSV.
pub const REPORT_HEADER: [&str; 5] = ["option_id", "days_evaluated", "num_trades", "total_pnl", "mean_rel_error"];

#[derive(Debug, Parser)]
#[command(
    name = "bsforecast",
    version,
    about = "Forecast option last prices one and two trading days ahead by a regularized forward solve of the Black-Scholes equation"
)]
pub struct Cli {
    #[command(flatten)]
    pub options: GlobalOptions,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// Regularization weight, in (0, 1)
    #[arg(long, global = true, env = "BSF_ALPHA", default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,

    /// Time step in years (one trading day = 1/255)
    #[arg(long, global = true, env = "BSF_TAU", default_value_t = TRADING_DAY)]
    pub tau: f64,

    /// Stock-price nodes (odd, >= 5)
    #[arg(long, global = true, env = "BSF_NS", default_value_t = DEFAULT_NODES)]
    pub ns: usize,

    /// Time nodes over [0, 2 tau] (odd, >= 5)
    #[arg(long, global = true, env = "BSF_NT", default_value_t = DEFAULT_NODES)]
    pub nt: usize,

    /// Dollars above the extrapolated ask required to buy
    #[arg(long, global = true, env = "BSF_CUTOFF", default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,

    /// Relative gradient-norm stopping threshold for conjugate gradient
    #[arg(long = "cg-tol", global = true, env = "BSF_CG_TOL", default_value_t = DEFAULT_CG_REL_TOL)]
    pub cg_tol: f64,

    /// Conjugate-gradient iteration cap [default: 10 x free nodes]
    #[arg(long = "cg-max-iters", global = true, env = "BSF_CG_MAX_ITERS")]
    pub cg_max_iters: Option<usize>,

    /// Run conjugate gradient without the banded Cholesky preconditioner
    #[arg(long = "plain-cg", global = true, env = "BSF_PLAIN_CG")]
    pub plain_cg: bool,

    /// Synthetic data noise level; 0 runs the noiseless case only [default: sweep 1e-2, 1e-3, 1e-4]
    #[arg(long = "noise-delta", global = true, env = "BSF_NOISE_DELTA")]
    pub noise_delta: Option<f64>,

    /// Exponent in alpha = delta^(2 beta) for noisy synthetic runs
    #[arg(long, global = true, env = "BSF_BETA", default_value_t = 0.5)]
    pub beta: f64,

    /// Seed of the synthetic noise generator
    #[arg(long, global = true, env = "BSF_SEED", default_value_t = 20141122)]
    pub seed: u64,

    /// Write a CSV report to this path
    #[arg(long, global = true, env = "BSF_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forecast one day of one option history
    Forecast {
        /// History CSV
        file: PathBuf,
        /// Day to treat as "today" (YYYY-MM-DD)
        #[arg(long)]
        date: NaiveDate,
    },
    /// Backtest the trading rule over one or more option histories
    Backtest {
        /// History CSVs; the file stem is used as the option id
        files: Vec<PathBuf>,
    },
    /// Synthetic round trip: manufacture a solution, perturb the data, recover it
    Synth,
    /// Print the norm growth of the reversed heat equation
    DemoIllposed {
        /// Number of Fourier modes
        #[arg(long = "n-max", default_value_t = 3)]
        n_max: usize,
        /// Comma-separated times
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.25,0.5,1")]
        times: Vec<f64>,
        /// Use coefficients f_n = exp(-n^2 t0) instead of f_n = 1/n
        #[arg(long = "decay-t0")]
        decay_t0: Option<f64>,
    },
}

/// Validated settings shared by all subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub tau: f64,
    pub strategy: StrategyConfig,
    pub noise_delta: Option<f64>,
    pub beta: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_options(o: &GlobalOptions) -> Result<Self, String> {
        let solver = SolverConfig {
            alpha: o.alpha,
            n_s: o.ns,
            n_t: o.nt,
            cg_rel_tol: o.cg_tol,
            cg_max_iters: o.cg_max_iters,
            precondition: !o.plain_cg,
        };
        solver.validate().map_err(|e| e.to_string())?;
        if !(o.tau > 0.0 && o.tau < 0.25) {
            return Err(format!("--tau must lie in (0, 0.25), got {}", o.tau));
        }
        if !(o.cutoff >= 0.0 && o.cutoff.is_finite()) {
            return Err(format!("--cutoff must be non-negative, got {}", o.cutoff));
        }
        if let Some(d) = o.noise_delta {
            if !(0.0..1.0).contains(&d) {
                return Err(format!("--noise-delta must lie in [0, 1), got {d}"));
            }
        }
        if !(o.beta > 0.0 && o.beta < 1.0) {
            return Err(format!("--beta must lie in (0, 1), got {}", o.beta));
        }
        Ok(Self {
            solver,
            tau: o.tau,
            strategy: StrategyConfig { cutoff: o.cutoff },
            noise_delta: o.noise_delta,
            beta: o.beta,
            seed: o.seed,
            out: o.out.clone(),
        })
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let config = match RunConfig::from_options(&cli.options) {
        Ok(c) => c,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Forecast { file, date } => cmd_forecast(&file, date, &config, out),
        Command::Backtest { files } => {
            if files.is_empty() {
                let _ = writeln!(err, "error: backtest needs at least one history file");
                return EXIT_USAGE;
            }
            cmd_backtest(&files, &config, out, err)
        }
        Command::Synth => cmd_synth(&config, out),
        Command::DemoIllposed {
            n_max,
            times,
            decay_t0,
        } => {
            if n_max == 0 {
                let _ = writeln!(err, "error: --n-max must be at least 1");
                return EXIT_USAGE;
            }
            cmd_demo_illposed(n_max, &times, decay_t0, out).map_err(CliError::from)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] Error),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Pipeline(e) => exit_code_for(e),
            CliError::Output(_) | CliError::Csv(_) => EXIT_DATA,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<crate::error::SolverError> for CliError {
    fn from(e: crate::error::SolverError) -> Self {
        CliError::Pipeline(e.into())
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Data(_) | Error::Model(_) => EXIT_DATA,
        Error::Solver(_) => EXIT_SOLVER,
    }
}

/// Reads a history file; the file stem becomes the option id.
pub fn load_history(path: &Path) -> Result<OptionHistory, DataError> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let file = File::open(path)?;
    parse_history(id, io::BufReader::new(file))
}

pub fn cmd_forecast(file: &Path, date: NaiveDate, config: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let history = load_history(file)?;
    let index = history.index_of(date).ok_or(DataError::DateNotFound(date))?;
    let window = history.window_at(index)?;
    let forecast = make_forecast(&window, config.tau, &config.solver)?;
    let decision = decide(&forecast, &config.strategy);

    writeln!(out, "option          {}", history.option_id())?;
    writeln!(out, "date            {date}")?;
    writeln!(out, "s_mid           {:.6}", forecast.s_mid)?;
    writeln!(out, "horizon         bid          ask          predicted")?;
    writeln!(
        out,
        "tau             {:<12.6} {:<12.6} {:.6}",
        forecast.extrap_bid_tau, forecast.extrap_ask_tau, forecast.predicted_tau
    )?;
    writeln!(
        out,
        "2tau            {:<12.6} {:<12.6} {:.6}",
        forecast.extrap_bid_2tau, forecast.extrap_ask_2tau, forecast.predicted_2tau
    )?;
    let mut flags = Vec::new();
    if forecast.flags.crossed_extrapolation {
        flags.push("crossed-extrapolation");
    }
    if forecast.flags.iteration_cap {
        flags.push("iteration-cap");
    }
    writeln!(
        out,
        "flags           {}",
        if flags.is_empty() { "none".to_string() } else { flags.join(",") }
    )?;
    writeln!(out, "decision        {}", decision.label())?;
    Ok(EXIT_OK)
}

fn format_rel_error(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

/// One report row per option plus a TOTAL row, as CSV records.
pub fn report_rows(reports: &[BacktestReport]) -> Vec<[String; 5]> {
    let mut rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.option_id.clone(),
                r.days_evaluated.to_string(),
                r.trades.len().to_string(),
                format!("{:.6}", r.total_pnl),
                format_rel_error(r.mean_rel_error),
            ]
        })
        .collect();
    let total_pnl = reports.iter().fold(0.0, |acc, r| acc + r.total_pnl);
    let means: Vec<f64> = reports.iter().filter_map(|r| r.mean_rel_error).collect();
    let mean = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
    rows.push([
        "TOTAL".to_string(),
        reports.iter().map(|r| r.days_evaluated).sum::<usize>().to_string(),
        reports.iter().map(|r| r.trades.len()).sum::<usize>().to_string(),
        format!("{total_pnl:.6}"),
        format_rel_error(mean),
    ]);
    rows
}

pub fn cmd_backtest(
    files: &[PathBuf],
    config: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let results: Vec<Result<BacktestReport, Error>> = files
        .par_iter()
        .map(|path| {
            let history = load_history(path)?;
            run_backtest(&history, config.tau, &config.solver, &config.strategy)
        })
        .collect();

    let mut reports = Vec::new();
    let mut worst = EXIT_OK;
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                writeln!(err, "skipping {}: {e}", path.display())?;
                worst = worst.max(exit_code_for(&e));
            }
        }
    }
    if reports.is_empty() {
        writeln!(err, "error: no option could be backtested")?;
        return Ok(worst);
    }

    let rows = report_rows(&reports);
    writeln!(
        out,
        "{:<24} {:>8} {:>8} {:>14} {:>16}",
        "option_id", "days", "trades", "total_pnl", "mean_rel_error"
    )?;
    for row in &rows {
        writeln!(out, "{:<24} {:>8} {:>8} {:>14} {:>16}", row[0], row[1], row[2], row[3], row[4])?;
    }
    if let Some(path) = &config.out {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(REPORT_HEADER)?;
        for row in &rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
    }
    Ok(EXIT_OK)
}

/// Rows of the synthetic error table: the noiseless row first, then one per δ.
pub fn synth_rows(config: &RunConfig) -> Result<Vec<SyntheticErrors>, Error> {
    let inputs = default_synthetic_inputs(config.tau)?;
    let deltas: Vec<f64> = match config.noise_delta {
        Some(d) => vec![d],
        None => DEFAULT_NOISE_SWEEP.to_vec(),
    };
    let mut rows = Vec::new();
    for (k, &delta) in deltas.iter().enumerate() {
        let syn = SyntheticConfig {
            noise_delta: delta,
            beta: config.beta,
            seed: config.seed,
            solver: config.solver,
            ..SyntheticConfig::default()
        };
        let report = run_synthetic(&inputs, &syn)?;
        if k == 0 {
            rows.push(report.noiseless);
        }
        rows.extend(report.noisy);
    }
    Ok(rows)
}

pub fn cmd_synth(config: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let rows = synth_rows(config)?;
    writeln!(
        out,
        "{:>10} {:>10} {:>14} {:>14} {:>14} {:>8}",
        "delta", "alpha", "err(Q_tau)", "err(Q_2tau)", "err(t=2tau)", "iters"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:>10.1e} {:>10.1e} {:>14.6e} {:>14.6e} {:>14.6e} {:>8}{}",
            r.delta,
            r.alpha,
            r.err_q_tau,
            r.err_q_2tau,
            r.err_top_row,
            r.iterations,
            if r.converged { "" } else { " (cap)" }
        )?;
    }
    if let Some(path) = &config.out {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["delta", "alpha", "err_q_tau", "err_q_2tau", "err_top_row", "iterations", "converged"])?;
        for r in &rows {
            writer.write_record([
                format!("{:e}", r.delta),
                format!("{:e}", r.alpha),
                format!("{:e}", r.err_q_tau),
                format!("{:e}", r.err_q_2tau),
                format!("{:e}", r.err_top_row),
                r.iterations.to_string(),
                r.converged.to_string(),
            ])?;
        }
        writer.flush()?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_demo_illposed(n_max: usize, times: &[f64], decay_t0: Option<f64>, out: &mut dyn Write) -> io::Result<i32> {
    let coeffs: Vec<f64> = (1..=n_max)
        .map(|n| {
            let n = n as f64;
            match decay_t0 {
                Some(t0) => (-n * n * t0).exp(),
                None => 1.0 / n,
            }
        })
        .collect();
    let base = reversed_heat_norm(&coeffs, 0.0);
    writeln!(out, "{:>10} {:>24} {:>24}", "t", "norm^2", "norm^2 / norm^2(t=0)")?;
    for &t in times {
        let v = reversed_heat_norm(&coeffs, t);
        writeln!(out, "{t:>10} {v:>24.12e} {:>24.12e}", v / base)?;
    }
    Ok(EXIT_OK)
}
