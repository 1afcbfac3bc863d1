//! Day-by-day backtest of the trading rule over one option's history, and
//! the synthetic round-trip experiment (manufacture a solution with the
//! well-posed downward solve, then recover it with the regularized forward solve).

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DataError, Result, SolverError};
use crate::forecast::{make_forecast, Forecast};
use crate::interp::{affine_quote, fit_quadratic, ForecastInputs, QuadPoly};
use crate::market_data::{OptionHistory, Window};
use crate::solver::{
    minimize_from, sigma_samples, solve_wellposed_downward, Grid, GridField, RegularizedFunctional, SolverConfig,
};
use crate::strategy::{decide, relative_error, Decision, StrategyConfig};

/// Shortest history a backtest accepts: one window plus two settlement days.
pub const MIN_BACKTEST_DAYS: usize = 5;

/// One bought-and-sold item.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub buy_date: NaiveDate,
    pub sell_date: NaiveDate,
    pub buy_price: f64,
    pub sell_price: f64,
    /// sell_price − buy_price.
    pub pnl: f64,
    /// Relative error of the prediction for the selling day against its last price.
    pub rel_error: f64,
    /// Trading days between purchase and sale (1 or 2).
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub option_id: String,
    pub trades: Vec<TradeRecord>,
    pub total_pnl: f64,
    /// Mean relative error over selling events; `None` when nothing was sold.
    pub mean_rel_error: Option<f64>,
    /// Number of days on which a forecast was made.
    pub days_evaluated: usize,
    pub decision_counts: BTreeMap<Decision, usize>,
    /// Trades not opened because a sell day would fall past the history.
    pub skipped_at_end: usize,
}

/// Runs the backtest with the regularized forecaster.
pub fn run_backtest(
    history: &OptionHistory,
    tau: f64,
    solver: &SolverConfig,
    strategy: &StrategyConfig,
) -> Result<BacktestReport> {
    run_backtest_with(history, strategy, |w| make_forecast(w, tau, solver))
}

/// Runs the backtest with an arbitrary forecaster.
///
/// Starting at the first day with two predecessors: forecast, decide, buy at
/// today's last price, sell at the last price of each scheduled day, then
/// jump ahead by the decision's offset.
pub fn run_backtest_with<F>(history: &OptionHistory, strategy: &StrategyConfig, mut forecaster: F) -> Result<BacktestReport>
where
    F: FnMut(&Window) -> Result<Forecast>,
{
    if history.len() < MIN_BACKTEST_DAYS {
        return Err(DataError::TooShort {
            found: history.len(),
            required: MIN_BACKTEST_DAYS,
        }
        .into());
    }
    let records = history.records();
    let mut trades = Vec::new();
    let mut decision_counts: BTreeMap<Decision, usize> = Decision::ALL.iter().map(|&d| (d, 0)).collect();
    let mut days_evaluated = 0;
    let mut skipped_at_end = 0;

    let mut day = 2;
    while day < records.len() {
        let window = history.window_at(day)?;
        let forecast = forecaster(&window)?;
        days_evaluated += 1;

        let mut decision = decide(&forecast, strategy);
        let last_sell = decision.sell_horizons().iter().max().copied().unwrap_or(0);
        if day + last_sell >= records.len() {
            skipped_at_end += 1;
            decision = Decision::NoTrade;
        }
        *decision_counts.entry(decision).or_default() += 1;

        let buy = &records[day];
        for &h in decision.sell_horizons() {
            let sell = &records[day + h];
            trades.push(TradeRecord {
                buy_date: buy.date,
                sell_date: sell.date,
                buy_price: buy.opt_last,
                sell_price: sell.opt_last,
                pnl: sell.opt_last - buy.opt_last,
                rel_error: relative_error(forecast.predicted(h), sell.opt_last)?,
                horizon: h,
            });
        }
        day += decision.next_forecast_offset();
    }

    let total_pnl = trades.iter().fold(0.0, |acc, t| acc + t.pnl);
    let mean_rel_error = if trades.is_empty() {
        None
    } else {
        Some(trades.iter().fold(0.0, |acc, t| acc + t.rel_error) / trades.len() as f64)
    };
    Ok(BacktestReport {
        option_id: history.option_id().to_string(),
        trades,
        total_pnl,
        mean_rel_error,
        days_evaluated,
        decision_counts,
        skipped_at_end,
    })
}

/// Settings of the synthetic round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    /// Relative noise level δ in [0, 1); zero runs the noiseless case only.
    pub noise_delta: f64,
    /// α = δ^(2β).
    pub beta: f64,
    pub seed: u64,
    /// Grid and CG settings; `alpha` here is the noiseless-case weight.
    pub solver: SolverConfig,
    /// Relative height of the parabolic bump added to the terminal profile.
    pub terminal_bump: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            noise_delta: 1e-2,
            beta: 0.5,
            seed: 20141122,
            solver: SolverConfig::default(),
            terminal_bump: 0.25,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.noise_delta >= 0.0 && self.noise_delta < 1.0) {
            return Err(SolverError::Config(format!(
                "noise_delta must lie in [0, 1), got {}",
                self.noise_delta
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(SolverError::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        self.solver.validate()
    }

    /// α for the noisy run.
    pub fn noisy_alpha(&self) -> f64 {
        self.noise_delta.powf(2.0 * self.beta)
    }
}

/// Relative L₂ errors of one recovered field against the manufactured one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticErrors {
    pub delta: f64,
    pub alpha: f64,
    /// Over the lower half t ∈ [0, τ].
    pub err_q_tau: f64,
    /// Over the full rectangle t ∈ [0, 2τ].
    pub err_q_2tau: f64,
    /// On the top row t = 2τ.
    pub err_top_row: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReport {
    pub noiseless: SyntheticErrors,
    pub noisy: Option<SyntheticErrors>,
    /// The manufactured exact solution.
    pub exact: GridField,
}

/// Market-like inputs for the synthetic experiment: stock quotes 99/101,
/// σ ≡ 0.2, option bid near 2.00 and ask near 2.20.
pub fn default_synthetic_inputs(tau: f64) -> Result<ForecastInputs, SolverError> {
    Ok(ForecastInputs::new(
        fit_quadratic(1.90, 1.95, 2.00, tau)?,
        fit_quadratic(2.10, 2.16, 2.20, tau)?,
        QuadPoly::constant(0.2, tau)?,
        99.0,
        101.0,
    )?)
}

/// Terminal profile: the reference at t = 2τ times a parabolic bump that
/// vanishes at both ends of the stock interval.
pub fn terminal_profile(inputs: &ForecastInputs, grid: &Grid, bump: f64) -> Vec<f64> {
    let t = 2.0 * inputs.tau;
    let (ub, ua) = (inputs.ub_poly.eval(t), inputs.ua_poly.eval(t));
    let width = inputs.s_a - inputs.s_b;
    grid.s_nodes
        .iter()
        .map(|&s| {
            let shape = 4.0 * (s - inputs.s_b) * (inputs.s_a - s) / (width * width);
            affine_quote(ub, ua, inputs.s_b, inputs.s_a, s) * (1.0 + bump * shape)
        })
        .collect()
}

/// Reference field for a general initial profile `f`:
/// `F(s, t) = f(s) + Flin(s, t) − Flin(s, 0)` where `Flin` interpolates the
/// bid and ask polynomials linearly in s. Matches `f` at t = 0 and the
/// polynomials on the boundary columns.
pub fn reference_with_initial(initial: &[f64], ub: &QuadPoly, ua: &QuadPoly, grid: &Grid) -> GridField {
    let (n_s, n_t) = grid.shape();
    let (s_b, s_a) = (grid.s_b(), grid.s_a());
    let (ub0, ua0) = (ub.c(), ua.c());
    let mut field = GridField::zeros(n_s, n_t);
    for (i, &s) in grid.s_nodes.iter().enumerate() {
        for (j, &t) in grid.t_nodes.iter().enumerate() {
            let v = if j == 0 {
                initial[i]
            } else if i == 0 {
                ub.eval(t)
            } else if i == n_s - 1 {
                ua.eval(t)
            } else {
                initial[i] + affine_quote(ub.eval(t), ua.eval(t), s_b, s_a, s) - affine_quote(ub0, ua0, s_b, s_a, s)
            };
            field.set(i, j, v);
        }
    }
    field
}

/// Relative L₂ error of `u` against `exact` over columns `j_lo..=j_hi`.
pub fn relative_l2(u: &GridField, exact: &GridField, j_lo: usize, j_hi: usize) -> f64 {
    let (n_s, _) = exact.shape();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n_s {
        for j in j_lo..=j_hi {
            let e = exact.get(i, j);
            let d = u.get(i, j) - e;
            num += d * d;
            den += e * e;
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Manufactures an exact solution by the downward solve, perturbs the data
/// (when δ > 0), recovers it by minimization and reports errors.
pub fn run_synthetic(inputs: &ForecastInputs, syn: &SyntheticConfig) -> Result<SyntheticReport, SolverError> {
    syn.validate()?;
    let grid = Grid::new(inputs.s_b, inputs.s_a, inputs.tau, syn.solver.n_s, syn.solver.n_t)?;
    let terminal = terminal_profile(inputs, &grid, syn.terminal_bump);
    let exact = solve_wellposed_downward(&terminal, inputs, &grid)?;
    let sigma = sigma_samples(&inputs.sigma_poly, &grid);

    let f_exact = exact.time_row(0);
    let reference = reference_with_initial(&f_exact, &inputs.ub_poly, &inputs.ua_poly, &grid);
    let noiseless = recover(&grid, &sigma, reference, &exact, 0.0, syn.solver.alpha, &syn.solver)?;

    let noisy = if syn.noise_delta > 0.0 {
        let delta = syn.noise_delta;
        let mut rng = ChaCha8Rng::seed_from_u64(syn.seed);
        let mut perturb = |v: f64| v * (1.0 + delta * rng.gen_range(-1.0..=1.0));
        let tau = inputs.tau;
        let [b2, b1, b0] = inputs.ub_poly.nodes();
        let [a2, a1, a0] = inputs.ua_poly.nodes();
        let ub = fit_quadratic(perturb(b2), perturb(b1), perturb(b0), tau)?;
        let ua = fit_quadratic(perturb(a2), perturb(a1), perturb(a0), tau)?;
        let n_s = grid.n_s();
        let mut f_noisy: Vec<f64> = f_exact.iter().map(|&v| perturb(v)).collect();
        f_noisy[0] = ub.c();
        f_noisy[n_s - 1] = ua.c();
        let reference = reference_with_initial(&f_noisy, &ub, &ua, &grid);
        Some(recover(&grid, &sigma, reference, &exact, delta, syn.noisy_alpha(), &syn.solver)?)
    } else {
        None
    };

    Ok(SyntheticReport {
        noiseless,
        noisy,
        exact,
    })
}

fn recover(
    grid: &Grid,
    sigma: &[f64],
    reference: GridField,
    exact: &GridField,
    delta: f64,
    alpha: f64,
    solver: &SolverConfig,
) -> Result<SyntheticErrors, SolverError> {
    let config = SolverConfig { alpha, ..*solver };
    let functional = RegularizedFunctional::new(grid.clone(), sigma.to_vec(), reference, alpha)?;
    let m = minimize_from(&functional, &GridField::zeros(grid.n_s(), grid.n_t()), &config)?;
    let (tau_j, top) = (grid.tau_index(), grid.top_index());
    Ok(SyntheticErrors {
        delta,
        alpha,
        err_q_tau: relative_l2(&m.field, exact, 0, tau_j),
        err_q_2tau: relative_l2(&m.field, exact, 0, top),
        err_top_row: relative_l2(&m.field, exact, top, top),
        iterations: m.iterations,
        converged: m.converged,
    })
}
