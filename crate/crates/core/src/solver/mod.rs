//! Regularized forward-in-time solver for the Black-Scholes equation on the
//! rectangle [s_b, s_a] × [0, 2τ], plus the well-posed downward solver used
//! to manufacture synthetic data.

mod downward;
mod functional;
mod grid;
mod illposed;
mod minimize;
mod precondition;

pub use downward::{march_downward, solve_tridiagonal, solve_wellposed_downward};
pub use functional::{apply_l, functional, gradient, h2_norm_sq, sigma_samples, RegularizedFunctional};
pub use grid::{build_grid, Grid, GridField};
pub use illposed::reversed_heat_norm;
pub use precondition::BandCholesky;
pub use minimize::{market_functional, minimize, minimize_from, reference_field, Minimization};

use crate::error::SolverError;

/// Regularization weight used for market forecasts.
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_NODES: usize = 21;
pub const DEFAULT_CG_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Regularization weight, in (0, 1).
    pub alpha: f64,
    pub n_s: usize,
    pub n_t: usize,
    /// Stop when ‖∇J‖ ≤ cg_rel_tol · ‖∇J(start)‖.
    pub cg_rel_tol: f64,
    /// Iteration cap; `None` means ten times the number of free nodes.
    pub cg_max_iters: Option<usize>,
    /// Precondition with a banded Cholesky factor of the Hessian.
    pub precondition: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            n_s: DEFAULT_NODES,
            n_t: DEFAULT_NODES,
            cg_rel_tol: DEFAULT_CG_REL_TOL,
            cg_max_iters: None,
            precondition: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SolverError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol.is_finite()) {
            return Err(SolverError::Config(format!(
                "cg_rel_tol must be positive, got {}",
                self.cg_rel_tol
            )));
        }
        for (name, n) in [("n_s", self.n_s), ("n_t", self.n_t)] {
            if n < 5 || n % 2 == 0 {
                return Err(SolverError::Config(format!("{name} must be odd and at least 5, got {n}")));
            }
        }
        if self.cg_max_iters == Some(0) {
            return Err(SolverError::Config("cg_max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn max_iterations(&self, grid: &Grid) -> usize {
        self.cg_max_iters.unwrap_or(10 * grid.free_count())
    }
}
