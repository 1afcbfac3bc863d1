//! Quadratic interpolation of the three trailing quotes, extrapolation onto
//! the forecast horizon, and the affine-in-s initial and reference fields.
//!
//! Times are in years with "today" at t = 0 and the observations at
//! t = -2τ, -τ, 0.

use crate::error::ModelError;
use crate::market_data::Window;

/// Lower bound applied to the extrapolated volatility.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// One trading day in years (255 trading days per year).
pub const TRADING_DAY: f64 = 1.0 / 255.0;

/// The unique quadratic through values at t = -2τ, -τ, 0.
///
/// Evaluation uses the Lagrange basis in the normalized variable t/τ, so the
/// three fitted nodes are reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoly {
    tau: f64,
    nodes: [f64; 3],
}

impl QuadPoly {
    pub fn constant(value: f64, tau: f64) -> Result<Self, ModelError> {
        fit_quadratic(value, value, value, tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Fitted values at t = -2τ, -τ, 0.
    pub fn nodes(&self) -> [f64; 3] {
        self.nodes
    }

    /// Leading coefficient `a` of `a t² + b t + c`.
    pub fn a(&self) -> f64 {
        let [m2, m1, z] = self.nodes;
        (m2 - 2.0 * m1 + z) / (2.0 * self.tau * self.tau)
    }

    pub fn b(&self) -> f64 {
        let [m2, m1, z] = self.nodes;
        (m2 - 4.0 * m1 + 3.0 * z) / (2.0 * self.tau)
    }

    pub fn c(&self) -> f64 {
        self.nodes[2]
    }

    /// p(t) with no domain check.
    pub fn eval(&self, t: f64) -> f64 {
        let x = t / self.tau;
        let [m2, m1, z] = self.nodes;
        let l_m2 = 0.5 * x * (x + 1.0);
        let l_m1 = -x * (x + 2.0);
        let l_0 = 0.5 * (x + 1.0) * (x + 2.0);
        m2 * l_m2 + m1 * l_m1 + z * l_0
    }

    /// p(t) for t in [-2τ, 2τ], the only range where the model claims validity.
    pub fn extrapolate(&self, t: f64) -> Result<f64, ModelError> {
        extrapolate(self, t)
    }

    /// Multiplies every node value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            tau: self.tau,
            nodes: self.nodes.map(|v| v * factor),
        }
    }
}

/// Fits the quadratic through `(-2τ, v_m2)`, `(-τ, v_m1)`, `(0, v_0)`.
pub fn fit_quadratic(v_m2: f64, v_m1: f64, v_0: f64, tau: f64) -> Result<QuadPoly, ModelError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(ModelError::InvalidTau(tau));
    }
    Ok(QuadPoly {
        tau,
        nodes: [v_m2, v_m1, v_0],
    })
}

pub fn extrapolate(p: &QuadPoly, t: f64) -> Result<f64, ModelError> {
    let limit = 2.0 * p.tau;
    if !(t >= -limit && t <= limit) {
        return Err(ModelError::OutOfDomain {
            what: "t",
            value: t,
            lo: -limit,
            hi: limit,
        });
    }
    Ok(p.eval(t))
}

/// Everything the forward solve needs from one window of quotes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastInputs {
    pub ub_poly: QuadPoly,
    pub ua_poly: QuadPoly,
    pub sigma_poly: QuadPoly,
    /// Stock bid at t = 0.
    pub s_b: f64,
    /// Stock ask at t = 0.
    pub s_a: f64,
    pub tau: f64,
}

impl ForecastInputs {
    pub fn new(
        ub_poly: QuadPoly,
        ua_poly: QuadPoly,
        sigma_poly: QuadPoly,
        s_b: f64,
        s_a: f64,
    ) -> Result<Self, ModelError> {
        let tau = ub_poly.tau;
        if !(tau > 0.0 && tau < 0.25) {
            return Err(ModelError::InvalidTau(tau));
        }
        for p in [&ua_poly, &sigma_poly] {
            if p.tau != tau {
                return Err(ModelError::InvalidTau(p.tau));
            }
        }
        if !(s_b.is_finite() && s_a.is_finite() && s_b < s_a) {
            return Err(ModelError::CrossedStock { s_b, s_a });
        }
        let (u_b, u_a) = (ub_poly.c(), ua_poly.c());
        if !(u_b < u_a) {
            return Err(ModelError::CrossedOption { u_b, u_a });
        }
        Ok(Self {
            ub_poly,
            ua_poly,
            sigma_poly,
            s_b,
            s_a,
            tau,
        })
    }

    /// Fits bid, ask and volatility over the window; stock quotes come from today only.
    pub fn from_window(window: &Window, tau: f64) -> Result<Self, ModelError> {
        let [d2, d1, d0] = window.days();
        let ub = fit_quadratic(d2.opt_bid, d1.opt_bid, d0.opt_bid, tau)?;
        let ua = fit_quadratic(d2.opt_ask, d1.opt_ask, d0.opt_ask, tau)?;
        let sigma = fit_quadratic(d2.impl_vol, d1.impl_vol, d0.impl_vol, tau)?;
        Self::new(ub, ua, sigma, d0.stock_bid, d0.stock_ask)
    }

    pub fn s_mid(&self) -> f64 {
        0.5 * (self.s_b + self.s_a)
    }

    /// True when the extrapolated ask fails to exceed the extrapolated bid
    /// at t = τ or t = 2τ.
    pub fn crossed_extrapolation(&self) -> bool {
        [self.tau, 2.0 * self.tau]
            .iter()
            .any(|&t| !(self.ua_poly.eval(t) > self.ub_poly.eval(t)))
    }

    /// Extrapolated volatility, clamped below at [`SIGMA_FLOOR`].
    pub fn sigma_at(&self, t: f64) -> f64 {
        clamped_sigma(&self.sigma_poly, t)
    }

    /// Same inputs with option quotes scaled by `factor`.
    pub fn with_scaled_quotes(&self, factor: f64) -> Self {
        Self {
            ub_poly: self.ub_poly.scaled(factor),
            ua_poly: self.ua_poly.scaled(factor),
            ..*self
        }
    }

    fn check_s(&self, s: f64) -> Result<(), ModelError> {
        if s >= self.s_b && s <= self.s_a {
            Ok(())
        } else {
            Err(ModelError::OutOfDomain {
                what: "s",
                value: s,
                lo: self.s_b,
                hi: self.s_a,
            })
        }
    }
}

/// Volatility polynomial at `t`, clamped below at [`SIGMA_FLOOR`].
pub fn clamped_sigma(sigma_poly: &QuadPoly, t: f64) -> f64 {
    let raw = sigma_poly.eval(t);
    if raw >= SIGMA_FLOOR {
        raw
    } else {
        log::warn!("extrapolated volatility {raw:.3e} at t = {t:.3e} clamped to {SIGMA_FLOOR:e}");
        SIGMA_FLOOR
    }
}

/// Linear interpolation between the bid at `s_b` and the ask at `s_a`.
///
/// Written as `(1 - w) u_b + w u_a` so both endpoints are reproduced exactly.
pub(crate) fn affine_quote(u_b: f64, u_a: f64, s_b: f64, s_a: f64, s: f64) -> f64 {
    if u_b == u_a {
        return u_b;
    }
    let w = (s - s_b) / (s_a - s_b);
    (1.0 - w) * u_b + w * u_a
}

/// f(s): the linear initial profile joining u_b(0) at s_b and u_a(0) at s_a.
pub fn initial_condition(inputs: &ForecastInputs, s: f64) -> Result<f64, ModelError> {
    inputs.check_s(s)?;
    Ok(affine_quote(
        inputs.ub_poly.c(),
        inputs.ua_poly.c(),
        inputs.s_b,
        inputs.s_a,
        s,
    ))
}

/// F(s, t): affine in s between the extrapolated bid and ask at time t.
pub fn reference_function(inputs: &ForecastInputs, s: f64, t: f64) -> Result<f64, ModelError> {
    inputs.check_s(s)?;
    let hi = 2.0 * inputs.tau;
    if !(t >= 0.0 && t <= hi) {
        return Err(ModelError::OutOfDomain {
            what: "t",
            value: t,
            lo: 0.0,
            hi,
        });
    }
    let (u_b, u_a) = if t == 0.0 {
        (inputs.ub_poly.c(), inputs.ua_poly.c())
    } else {
        (inputs.ub_poly.eval(t), inputs.ua_poly.eval(t))
    };
    Ok(affine_quote(u_b, u_a, inputs.s_b, inputs.s_a, s))
}
