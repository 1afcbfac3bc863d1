#![allow(dead_code)]

use std::path::PathBuf;

use bsforecast::forecast::{Forecast, ForecastFlags};
use bsforecast::{DailyRecord, OptionHistory};
use chrono::NaiveDate;

pub fn date(k: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 10, 1).unwrap() + chrono::Duration::days(k as i64)
}

/// One day with the given option last price and fixed quotes around it.
pub fn record(k: usize, last: f64) -> DailyRecord {
    DailyRecord {
        date: date(k),
        opt_bid: last - 0.05,
        opt_ask: last + 0.05,
        opt_last: last,
        impl_vol: 0.3,
        stock_bid: 49.9,
        stock_ask: 50.1,
        stock_last: 50.0,
    }
}

pub fn history(lasts: &[f64]) -> OptionHistory {
    OptionHistory::new("fixture", lasts.iter().enumerate().map(|(k, &l)| record(k, l)).collect()).unwrap()
}

/// A stub forecast with the given predictions against fixed extrapolated asks.
pub fn stub_forecast(predicted_tau: f64, predicted_2tau: f64, ask_tau: f64, ask_2tau: f64) -> Forecast {
    Forecast {
        predicted_tau,
        predicted_2tau,
        extrap_bid_tau: ask_tau - 0.1,
        extrap_ask_tau: ask_tau,
        extrap_bid_2tau: ask_2tau - 0.1,
        extrap_ask_2tau: ask_2tau,
        s_mid: 50.0,
        flags: ForecastFlags::default(),
    }
}

/// Forecast that the default rule (cutoff 0.03) maps to `(a, b)`.
pub fn forecast_for_case(a: bool, b: bool) -> Forecast {
    let p = |hit: bool| if hit { 1.5 } else { 0.5 };
    stub_forecast(p(a), p(b), 1.0, 1.0)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn sample_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(data_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

/// Runs the CLI in-process and captures its output.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bsforecast").chain(args.iter().copied());
    let code = bsforecast::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
