mod common;

use bsforecast::backtest::{default_synthetic_inputs, run_backtest_with};
use bsforecast::market_data::write_history;
use bsforecast::solver::{h2_norm_sq, market_functional, minimize, minimize_from, GridField};
use bsforecast::{
    fit_quadratic, make_forecast, parse_history, DailyRecord, Decision, ForecastInputs, OptionHistory, QuadPoly,
    SolverConfig, StrategyConfig, Window, TRADING_DAY,
};
use common::*;
use proptest::prelude::*;

fn small() -> SolverConfig {
    SolverConfig {
        n_s: 7,
        n_t: 7,
        ..SolverConfig::default()
    }
}

fn arb_record() -> impl Strategy<Value = (f64, f64, f64, f64, f64, f64, f64)> {
    (
        0.01f64..50.0,
        0.001f64..2.0,
        0.0f64..1.0,
        0.01f64..2.0,
        1.0f64..500.0,
        0.001f64..1.0,
        0.0f64..1.0,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(arb_record(), 3..20)) {
        let records: Vec<DailyRecord> = rows
            .iter()
            .enumerate()
            .map(|(k, &(bid, spread, w, vol, sbid, sspread, sw))| DailyRecord {
                date: date(k),
                opt_bid: bid,
                opt_ask: bid + spread,
                opt_last: bid + w * spread,
                impl_vol: vol,
                stock_bid: sbid,
                stock_ask: sbid + sspread,
                stock_last: sbid + sw * sspread,
            })
            .collect();
        let h = OptionHistory::new("x", records).unwrap();
        let mut buf = Vec::new();
        write_history(&h, &mut buf).unwrap();
        let back = parse_history("x", buf.as_slice()).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn second_difference_is_constant(
        seed_u in prop::collection::vec(-1.0f64..1.0, 49),
        seed_v in prop::collection::vec(-1.0f64..1.0, 49),
        seed_d in prop::collection::vec(-1.0f64..1.0, 49),
    ) {
        let inputs = default_synthetic_inputs(TRADING_DAY).unwrap();
        let f = market_functional(&inputs, &small()).unwrap();
        let field = |s: &[f64]| {
            let mut g = GridField::zeros(7, 7);
            g.as_mut_slice().copy_from_slice(s);
            for x in g.as_mut_slice() {
                *x += 2.0;
            }
            g
        };
        let (u, v, d) = (field(&seed_u), field(&seed_v), field(&seed_d));
        let second = |base: &GridField| {
            let shifted = |k: f64| {
                let mut w = base.clone();
                for (x, y) in w.as_mut_slice().iter_mut().zip(d.as_slice()) {
                    *x += k * y;
                }
                f.value(&w).unwrap()
            };
            shifted(2.0) - 2.0 * shifted(1.0) + shifted(0.0)
        };
        let (a, b) = (second(&u), second(&v));
        prop_assert!(f.value(&u).unwrap() >= 0.0);
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "{a} vs {b}");
    }

    #[test]
    fn minimizer_scales_with_quotes(lambda in 0.1f64..10.0) {
        let inputs = default_synthetic_inputs(TRADING_DAY).unwrap();
        let cfg = SolverConfig::default();
        let base = minimize(&inputs, &cfg).unwrap().field;
        let scaled = minimize(&inputs.with_scaled_quotes(lambda), &cfg).unwrap().field;
        let scale = base.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in base.as_slice().iter().zip(scaled.as_slice()) {
            prop_assert!((lambda * a - b).abs() <= 1e-8 * lambda * scale);
        }
    }

    #[test]
    fn forecast_days_follow_offsets(script in prop::collection::vec(0usize..4, 1..40), len in 5usize..30) {
        let h = history(&vec![1.0; len]);
        let mut seen = Vec::new();
        let mut k = 0;
        let r = run_backtest_with(&h, &StrategyConfig::default(), |w| {
            seen.push(h.index_of(w.today()).unwrap());
            let case = script[k % script.len()];
            k += 1;
            Ok(forecast_for_case(case == 0 || case == 1, case == 0 || case == 2))
        })
        .unwrap();
        prop_assert_eq!(seen[0], 2);
        prop_assert_eq!(r.days_evaluated, seen.len());
        for pair in seen.windows(2) {
            prop_assert!(pair[1] - pair[0] == 1 || pair[1] - pair[0] == 2);
        }
        for t in &r.trades {
            prop_assert!(t.sell_date > t.buy_date && (t.horizon == 1 || t.horizon == 2));
        }
        let counted: usize = r.decision_counts.values().sum();
        prop_assert_eq!(counted, seen.len());
        prop_assert_eq!(
            r.trades.len(),
            2 * r.decision_counts[&Decision::BuyTwo]
                + r.decision_counts[&Decision::BuyOneSellAtTau]
                + r.decision_counts[&Decision::BuyOneSellAt2Tau]
        );
    }
}

#[test]
fn constrained_nodes_are_never_updated() {
    let inputs = default_synthetic_inputs(TRADING_DAY).unwrap();
    let cfg = small();
    let f = market_functional(&inputs, &cfg).unwrap();
    let start = GridField::filled(7, 7, 123.0);
    let m = minimize_from(&f, &start, &cfg).unwrap();
    let grid = f.grid();
    for i in 0..7 {
        for j in 0..7 {
            if !grid.is_free(i, j) {
                assert_eq!(m.field.get(i, j).to_bits(), f.reference().get(i, j).to_bits());
            }
        }
    }
}

#[test]
fn uniqueness_from_two_starts_on_small_grid() {
    let inputs = default_synthetic_inputs(TRADING_DAY).unwrap();
    for precondition in [true, false] {
        let cfg = SolverConfig {
            precondition,
            ..small()
        };
        let f = market_functional(&inputs, &cfg).unwrap();
        let a = minimize_from(&f, &GridField::zeros(7, 7), &cfg).unwrap();
        let b = minimize_from(&f, f.reference(), &cfg).unwrap();
        assert!(a.field.max_abs_diff(&b.field) <= 1e-8, "precondition {precondition}");
    }
}

#[test]
fn stability_shape_across_alpha() {
    let inputs = default_synthetic_inputs(TRADING_DAY).unwrap();
    let mut ratios = Vec::new();
    let mut reference_norm = 0.0;
    for alpha in [1e-1, 1e-2, 1e-3] {
        let cfg = SolverConfig {
            alpha,
            ..SolverConfig::default()
        };
        let f = market_functional(&inputs, &cfg).unwrap();
        reference_norm = h2_norm_sq(f.reference()).sqrt();
        let m = minimize(&inputs, &cfg).unwrap();
        assert!(m.converged);
        ratios.push(h2_norm_sq(&m.field).sqrt() * alpha.sqrt() / reference_norm);
    }
    assert!(reference_norm > 0.0);
    for pair in ratios.windows(2) {
        assert!(pair[1] <= 10.0 * pair[0], "{ratios:?}");
    }
}

fn window_with(scale: f64) -> Window {
    let day = |k: usize, bid: f64, ask: f64, vol: f64| DailyRecord {
        date: date(k),
        opt_bid: scale * bid,
        opt_ask: scale * ask,
        opt_last: scale * 0.5 * (bid + ask),
        impl_vol: vol,
        stock_bid: 49.8,
        stock_ask: 50.2,
        stock_last: 50.0,
    };
    Window {
        day_minus2: day(0, 2.10, 2.30, 0.31),
        day_minus1: day(1, 2.25, 2.40, 0.30),
        day_0: day(2, 2.20, 2.42, 0.32),
    }
}

#[test]
fn forecast_is_linear_in_option_quotes() {
    let cfg = SolverConfig::default();
    let base = make_forecast(&window_with(1.0), TRADING_DAY, &cfg).unwrap();
    for lambda in [0.5, 3.0] {
        let f = make_forecast(&window_with(lambda), TRADING_DAY, &cfg).unwrap();
        for (a, b) in [(base.predicted_tau, f.predicted_tau), (base.predicted_2tau, f.predicted_2tau)] {
            assert!((lambda * a - b).abs() <= 1e-8 * (lambda * a).abs(), "{lambda}: {a} vs {b}");
        }
        assert_eq!(f.s_mid, 50.0);
    }
}

#[test]
fn forecast_reads_mid_node_of_minimizer() {
    let w = window_with(1.0);
    let inputs = ForecastInputs::from_window(&w, TRADING_DAY).unwrap();
    let cfg = SolverConfig::default();
    let m = minimize(&inputs, &cfg).unwrap();
    let f = make_forecast(&w, TRADING_DAY, &cfg).unwrap();
    assert_eq!(f.predicted_tau, m.field.get(10, 10));
    assert_eq!(f.predicted_2tau, m.field.get(10, 20));
    assert_eq!(f.extrap_ask_tau, inputs.ua_poly.eval(TRADING_DAY));
}

#[test]
fn constant_quotes_give_constant_minimizer() {
    let c = QuadPoly::constant(3.25, TRADING_DAY).unwrap();
    let inputs = ForecastInputs::new(c, c.scaled(1.0), fit_quadratic(0.3, 0.3, 0.3, TRADING_DAY).unwrap(), 40.0, 40.4);
    // u_b == u_a is rejected as a crossed market, so build the inputs directly
    assert!(inputs.is_err());
    let inputs = ForecastInputs {
        ub_poly: c,
        ua_poly: c,
        sigma_poly: QuadPoly::constant(0.3, TRADING_DAY).unwrap(),
        s_b: 40.0,
        s_a: 40.4,
        tau: TRADING_DAY,
    };
    let m = minimize(&inputs, &SolverConfig::default()).unwrap();
    assert!(m.value < 1e-12);
    assert!(m.field.as_slice().iter().all(|v| (v - 3.25).abs() < 1e-8));
}
