//! One forecast event: window → quadratic fits → regularized solve →
//! predicted last prices at the stock mid-point one and two steps ahead.

use crate::error::Result;
use crate::interp::ForecastInputs;
use crate::market_data::Window;
use crate::solver::{minimize, SolverConfig};

/// Stock spreads narrower than this are solved anyway but logged.
pub const NARROW_STOCK_SPREAD: f64 = 0.01;

/// Reasons a forecast must not be traded on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForecastFlags {
    /// The extrapolated ask does not exceed the extrapolated bid at τ or 2τ.
    pub crossed_extrapolation: bool,
    /// Conjugate gradient stopped at its iteration cap.
    pub iteration_cap: bool,
}

impl ForecastFlags {
    pub fn abstain(&self) -> bool {
        self.crossed_extrapolation || self.iteration_cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    /// u_α(s_m, τ).
    pub predicted_tau: f64,
    /// u_α(s_m, 2τ).
    pub predicted_2tau: f64,
    pub extrap_bid_tau: f64,
    pub extrap_ask_tau: f64,
    pub extrap_bid_2tau: f64,
    pub extrap_ask_2tau: f64,
    pub s_mid: f64,
    pub flags: ForecastFlags,
}

impl Forecast {
    /// Predicted value at horizon 1 (τ) or 2 (2τ).
    pub fn predicted(&self, horizon: usize) -> f64 {
        match horizon {
            1 => self.predicted_tau,
            2 => self.predicted_2tau,
            _ => panic!("forecast horizon must be 1 or 2, got {horizon}"),
        }
    }
}

/// Forecast from already-fitted inputs.
pub fn forecast_from_inputs(inputs: &ForecastInputs, config: &SolverConfig) -> Result<Forecast> {
    if inputs.s_a - inputs.s_b < NARROW_STOCK_SPREAD {
        log::warn!(
            "stock spread {:.4} below {NARROW_STOCK_SPREAD}; solving on a very narrow interval",
            inputs.s_a - inputs.s_b
        );
    }
    let crossed = inputs.crossed_extrapolation();
    let solution = minimize(inputs, config)?;
    let grid_tau = (config.n_t - 1) / 2;
    let grid_top = config.n_t - 1;
    let mid = (config.n_s - 1) / 2;
    let tau = inputs.tau;
    Ok(Forecast {
        predicted_tau: solution.field.get(mid, grid_tau),
        predicted_2tau: solution.field.get(mid, grid_top),
        extrap_bid_tau: inputs.ub_poly.eval(tau),
        extrap_ask_tau: inputs.ua_poly.eval(tau),
        extrap_bid_2tau: inputs.ub_poly.eval(2.0 * tau),
        extrap_ask_2tau: inputs.ua_poly.eval(2.0 * tau),
        s_mid: inputs.s_mid(),
        flags: ForecastFlags {
            crossed_extrapolation: crossed,
            iteration_cap: !solution.converged,
        },
    })
}

/// Forecast for the window's "today", with time step `tau` in years.
pub fn make_forecast(window: &Window, tau: f64, config: &SolverConfig) -> Result<Forecast> {
    let inputs = ForecastInputs::from_window(window, tau)?;
    forecast_from_inputs(&inputs, config)
}
