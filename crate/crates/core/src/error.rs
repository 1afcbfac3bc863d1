//! Error types shared across the crate.

use chrono::NaiveDate;
use thiserror::Error;

/// Problems with input market data: malformed files, quotes that violate
/// the model's invariants, or requests for windows the history cannot serve.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("{date}: {message}")]
    Invalid { date: NaiveDate, message: String },

    #[error("line {line}: dates must be strictly increasing ({date} follows {previous})")]
    Unordered {
        line: u64,
        date: NaiveDate,
        previous: NaiveDate,
    },

    #[error("insufficient history: {found} rows, at least {required} required")]
    TooShort { found: usize, required: usize },

    #[error("insufficient history: window index {index} needs two prior days within {len} records")]
    WindowOutOfRange { index: usize, len: usize },

    #[error("date {0} not found in history")]
    DateNotFound(NaiveDate),
}

/// Contract violations in the interpolation model.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("time step tau = {0} must lie in (0, 1/4)")]
    InvalidTau(f64),

    #[error("stock quotes must satisfy s_b < s_a (got {s_b}, {s_a})")]
    CrossedStock { s_b: f64, s_a: f64 },

    #[error("option quotes must satisfy u_b < u_a at t = 0 (got {u_b}, {u_a})")]
    CrossedOption { u_b: f64, u_a: f64 },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("true last price must be positive (got {0})")]
    NonPositivePrice(f64),
}

/// Failures of the discretization or the numerical solvers.
#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("field shape {found:?} does not match grid {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("functional became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("tridiagonal elimination broke down at row {row} (pivot {pivot})")]
    Tridiagonal { row: usize, pivot: f64 },

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Top-level error for the forecasting and backtesting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
