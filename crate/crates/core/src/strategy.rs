//! The four-case trading rule and the relative forecast error.

use crate::error::ModelError;
use crate::forecast::Forecast;

/// Default margin above the extrapolated ask required to buy.
pub const DEFAULT_CUTOFF: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    /// Buy two today; sell one at τ and one at 2τ.
    BuyTwo,
    /// Buy one today; sell it at τ.
    BuyOneSellAtTau,
    /// Buy one today; sell it at 2τ.
    BuyOneSellAt2Tau,
    NoTrade,
}

impl Decision {
    pub const ALL: [Decision; 4] = [
        Decision::BuyTwo,
        Decision::BuyOneSellAtTau,
        Decision::BuyOneSellAt2Tau,
        Decision::NoTrade,
    ];

    /// Trading days until the next forecast.
    pub fn next_forecast_offset(self) -> usize {
        match self {
            Decision::BuyTwo | Decision::BuyOneSellAt2Tau => 2,
            Decision::BuyOneSellAtTau | Decision::NoTrade => 1,
        }
    }

    /// Horizons (in trading days) at which one item is sold.
    pub fn sell_horizons(self) -> &'static [usize] {
        match self {
            Decision::BuyTwo => &[1, 2],
            Decision::BuyOneSellAtTau => &[1],
            Decision::BuyOneSellAt2Tau => &[2],
            Decision::NoTrade => &[],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Decision::BuyTwo => "buy-two",
            Decision::BuyOneSellAtTau => "buy-one-sell-tau",
            Decision::BuyOneSellAt2Tau => "buy-one-sell-2tau",
            Decision::NoTrade => "no-trade",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    /// Dollars above the extrapolated ask a prediction must reach.
    pub cutoff: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self { cutoff: DEFAULT_CUTOFF }
    }
}

/// Applies the trading rule. Forecasts carrying an abstention flag are never traded.
pub fn decide(forecast: &Forecast, config: &StrategyConfig) -> Decision {
    if forecast.flags.abstain() {
        return Decision::NoTrade;
    }
    let a = forecast.predicted_tau >= forecast.extrap_ask_tau + config.cutoff;
    let b = forecast.predicted_2tau >= forecast.extrap_ask_2tau + config.cutoff;
    match (a, b) {
        (true, true) => Decision::BuyTwo,
        (true, false) => Decision::BuyOneSellAtTau,
        (false, true) => Decision::BuyOneSellAt2Tau,
        (false, false) => Decision::NoTrade,
    }
}

/// |predicted − true_last| / true_last.
pub fn relative_error(predicted: f64, true_last: f64) -> Result<f64, ModelError> {
    if !(true_last > 0.0) {
        return Err(ModelError::NonPositivePrice(true_last));
    }
    Ok((predicted - true_last).abs() / true_last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::ForecastFlags;
    use proptest::prelude::*;

    fn forecast(p1: f64, a1: f64, p2: f64, a2: f64) -> Forecast {
        Forecast {
            predicted_tau: p1,
            predicted_2tau: p2,
            extrap_bid_tau: a1 - 0.1,
            extrap_ask_tau: a1,
            extrap_bid_2tau: a2 - 0.1,
            extrap_ask_2tau: a2,
            s_mid: 50.0,
            flags: ForecastFlags::default(),
        }
    }

    #[test]
    fn buy_two_example() {
        let f = forecast(5.10, 5.00, 5.20, 5.05);
        assert_eq!(decide(&f, &StrategyConfig::default()), Decision::BuyTwo);
    }

    #[test]
    fn inside_spread_is_no_trade() {
        let f = forecast(4.95, 5.00, 5.0, 5.05);
        assert_eq!(decide(&f, &StrategyConfig::default()), Decision::NoTrade);
    }

    #[test]
    fn threshold_is_inclusive() {
        let f = forecast(1.25, 1.0, 0.0, 1.0);
        assert_eq!(decide(&f, &StrategyConfig { cutoff: 0.25 }), Decision::BuyOneSellAtTau);
    }

    #[test]
    fn flagged_forecast_never_trades() {
        let mut f = forecast(9.0, 1.0, 9.0, 1.0);
        f.flags.iteration_cap = true;
        assert_eq!(decide(&f, &StrategyConfig::default()), Decision::NoTrade);
    }

    #[test]
    fn offsets() {
        assert_eq!(Decision::BuyTwo.next_forecast_offset(), 2);
        assert_eq!(Decision::BuyOneSellAtTau.next_forecast_offset(), 1);
        assert_eq!(Decision::BuyOneSellAt2Tau.next_forecast_offset(), 2);
        assert_eq!(Decision::NoTrade.next_forecast_offset(), 1);
    }

    #[test]
    fn relative_errors() {
        assert!((relative_error(1.1, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(relative_error(2.5, 2.5).unwrap(), 0.0);
        assert!((relative_error(0.8, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(relative_error(1.0, 0.0).is_err());
        assert!(relative_error(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_first_prediction(
            p1 in 0.0f64..10.0, bump in 0.0f64..5.0,
            a1 in 0.1f64..10.0, p2 in 0.0f64..10.0, a2 in 0.1f64..10.0,
        ) {
            let cfg = StrategyConfig::default();
            let before = decide(&forecast(p1, a1, p2, a2), &cfg);
            let after = decide(&forecast(p1 + bump, a1, p2, a2), &cfg);
            if before != Decision::NoTrade {
                prop_assert_ne!(after, Decision::NoTrade);
            }
        }

        #[test]
        fn invariant_under_joint_scaling(
            p1 in 0.0f64..10.0, a1 in 0.1f64..10.0,
            p2 in 0.0f64..10.0, a2 in 0.1f64..10.0,
            cutoff in 0.0f64..0.1, k in 0u32..8,
        ) {
            // powers of two keep the scaling exact in binary floating point
            let lambda = 2f64.powi(k as i32 - 4);
            let base = decide(&forecast(p1, a1, p2, a2), &StrategyConfig { cutoff });
            let scaled = decide(
                &forecast(lambda * p1, lambda * a1, lambda * p2, lambda * a2),
                &StrategyConfig { cutoff: lambda * cutoff },
            );
            prop_assert_eq!(base, scaled);
        }
    }
}
