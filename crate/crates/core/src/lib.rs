//! Short-horizon forecasts of option last prices.
//!
//! The Black-Scholes equation is solved forward in time, an ill-posed
//! problem, on a small rectangle of stock prices × time built from three
//! trailing days of market quotes. The solution is regularized as the
//! minimizer of a least-squares functional (PDE residual plus an H² penalty
//! toward a reference field interpolating the quotes), computed by conjugate
//! gradient. Forecasts feed a four-case trading rule evaluated by a backtest.

pub mod backtest;
pub mod cli;
pub mod error;
pub mod forecast;
pub mod interp;
pub mod market_data;
pub mod solver;
pub mod strategy;

pub use backtest::{run_backtest, run_backtest_with, run_synthetic, BacktestReport, SyntheticConfig, TradeRecord};
pub use error::{DataError, Error, ModelError, Result, SolverError};
pub use forecast::{make_forecast, Forecast, ForecastFlags};
pub use interp::{fit_quadratic, ForecastInputs, QuadPoly, TRADING_DAY};
pub use market_data::{parse_history, window_at, DailyRecord, OptionHistory, Window};
pub use solver::{minimize, Grid, GridField, SolverConfig};
pub use strategy::{decide, relative_error, Decision, StrategyConfig};
