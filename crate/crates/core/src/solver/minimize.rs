//! Conjugate-gradient minimization of the regularized functional under fixed
//! initial and boundary values.

use crate::error::SolverError;
use crate::interp::{reference_function, ForecastInputs};

use super::functional::RegularizedFunctional;
use super::grid::{build_grid, Grid, GridField};
use super::precondition::{assemble_band, BandCholesky};
use super::SolverConfig;

/// Result of one minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimization {
    pub field: GridField,
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached before the gradient criterion.
    pub converged: bool,
    pub initial_gradient_norm: f64,
    pub gradient_norm: f64,
}

/// Samples the reference field F on the grid.
pub fn reference_field(inputs: &ForecastInputs, grid: &Grid) -> Result<GridField, SolverError> {
    let mut field = GridField::zeros(grid.n_s(), grid.n_t());
    for (i, &s) in grid.s_nodes.iter().enumerate() {
        for (j, &t) in grid.t_nodes.iter().enumerate() {
            field.set(i, j, reference_function(inputs, s, t)?);
        }
    }
    Ok(field)
}

/// Builds the functional for market inputs.
pub fn market_functional(inputs: &ForecastInputs, config: &SolverConfig) -> Result<RegularizedFunctional, SolverError> {
    config.validate()?;
    let grid = build_grid(inputs, config)?;
    let reference = reference_field(inputs, &grid)?;
    RegularizedFunctional::with_sigma_poly(grid, &inputs.sigma_poly, reference, config.alpha)
}

/// Minimizes J_α for the inputs, starting from u ≡ 0 on the free nodes.
pub fn minimize(inputs: &ForecastInputs, config: &SolverConfig) -> Result<Minimization, SolverError> {
    let functional = market_functional(inputs, config)?;
    let (n_s, n_t) = functional.grid().shape();
    minimize_from(&functional, &GridField::zeros(n_s, n_t), config)
}

/// Linear conjugate gradient on the free nodes from `start`, optionally
/// preconditioned. Stops once the gradient norm (and, when preconditioned,
/// its M⁻¹-norm) has dropped by `cg_rel_tol`, confirmed on a freshly
/// evaluated gradient.
///
/// Constrained nodes of `start` are replaced by the reference values and are
/// never touched afterwards.
pub fn minimize_from(
    functional: &RegularizedFunctional,
    start: &GridField,
    config: &SolverConfig,
) -> Result<Minimization, SolverError> {
    config.validate()?;
    let grid = functional.grid();
    start.check_shape(grid)?;
    let (n_s, n_t) = grid.shape();
    let max_iters = config.max_iterations(grid);

    let mut u = start.clone();
    let reference = functional.reference();
    for i in 0..n_s {
        for j in 0..n_t {
            if !grid.is_free(i, j) {
                u.set(i, j, reference.get(i, j));
            }
        }
    }
    let free: Vec<usize> = (0..n_s)
        .flat_map(|i| (0..n_t).map(move |j| (i, j)))
        .filter(|&(i, j)| grid.is_free(i, j))
        .map(|(i, j)| i * n_t + j)
        .collect();

    let preconditioner = if config.precondition {
        let (bw, band) = assemble_band(functional, &free);
        let factor = BandCholesky::factor(free.len(), bw, band);
        if factor.is_none() {
            log::warn!("Hessian factorization failed; falling back to plain conjugate gradient");
        }
        factor
    } else {
        None
    };
    let mut z_free = vec![0.0; free.len()];
    let mut z = vec![0.0; n_s * n_t];
    let mut precondition = |g: &[f64], z: &mut [f64]| match &preconditioner {
        Some(factor) => {
            for (slot, &k) in z_free.iter_mut().zip(&free) {
                *slot = g[k];
            }
            factor.solve_in_place(&mut z_free);
            for (&v, &k) in z_free.iter().zip(&free) {
                z[k] = v;
            }
        }
        None => z.copy_from_slice(g),
    };

    let mut g = functional.gradient(&u)?.as_slice().to_vec();
    let g0 = dot(&g, &g).sqrt();
    if !g0.is_finite() {
        return Err(SolverError::NonFinite { iteration: 0 });
    }
    precondition(&g, &mut z);
    let mut d: Vec<f64> = z.iter().map(|x| -x).collect();
    let mut hd = vec![0.0; g.len()];
    let mut rz = dot(&g, &z);
    let mut g_norm = g0;
    let threshold = config.cg_rel_tol * g0;
    // With a preconditioner the plain gradient norm is dominated by stiff
    // modes; the M⁻¹-norm of the gradient must drop by the same factor too.
    let rz_threshold = config.cg_rel_tol * config.cg_rel_tol * rz;
    let done = |g_norm: f64, rz: f64| g_norm <= threshold && (preconditioner.is_none() || rz <= rz_threshold);

    let mut iterations = 0;
    let mut converged = done(g_norm, rz);
    while !converged && iterations < max_iters {
        functional.hessian_apply(&d, &mut hd);
        let curvature = dot(&d, &hd);
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(SolverError::NonFinite { iteration: iterations });
        }
        let step = rz / curvature;
        let vals = u.as_mut_slice();
        for &k in &free {
            vals[k] += step * d[k];
            g[k] += step * hd[k];
        }
        g_norm = dot(&g, &g).sqrt();
        if !g_norm.is_finite() {
            return Err(SolverError::NonFinite { iteration: iterations });
        }
        precondition(&g, &mut z);
        let rz_next = dot(&g, &z);
        let beta = rz_next / rz;
        for &k in &free {
            d[k] = -z[k] + beta * d[k];
        }
        rz = rz_next;
        iterations += 1;
        converged = done(g_norm, rz);
        if converged {
            // the recurrence drifts from the true gradient on stiff problems:
            // confirm with a fresh evaluation and restart if it disagrees
            g = functional.gradient(&u)?.as_slice().to_vec();
            g_norm = dot(&g, &g).sqrt();
            precondition(&g, &mut z);
            rz = dot(&g, &z);
            converged = done(g_norm, rz);
            if !converged {
                for &k in &free {
                    d[k] = -z[k];
                }
            }
        }
    }

    if !converged {
        log::warn!(
            "conjugate gradient hit the iteration cap ({max_iters}) at relative gradient {:.3e}",
            g_norm / g0
        );
    }
    let value = functional.value(&u)?;
    if !value.is_finite() || !u.is_finite() {
        return Err(SolverError::NonFinite { iteration: iterations });
    }
    Ok(Minimization {
        field: u,
        value,
        iterations,
        converged,
        initial_gradient_norm: g0,
        gradient_norm: g_norm,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{fit_quadratic, QuadPoly, TRADING_DAY};

    fn inputs() -> ForecastInputs {
        let tau = TRADING_DAY;
        ForecastInputs::new(
            fit_quadratic(1.90, 1.95, 2.00, tau).unwrap(),
            fit_quadratic(2.10, 2.16, 2.20, tau).unwrap(),
            fit_quadratic(0.21, 0.20, 0.20, tau).unwrap(),
            99.0,
            101.0,
        )
        .unwrap()
    }

    fn small_config() -> SolverConfig {
        SolverConfig {
            n_s: 9,
            n_t: 9,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn constant_quotes_give_constant_minimizer() {
        let tau = TRADING_DAY;
        let c = QuadPoly::constant(1.5, tau).unwrap();
        let inp = ForecastInputs {
            ub_poly: c,
            ua_poly: c,
            sigma_poly: QuadPoly::constant(0.3, tau).unwrap(),
            s_b: 20.0,
            s_a: 20.5,
            tau,
        };
        let m = minimize(&inp, &small_config()).unwrap();
        assert!(m.converged);
        assert!(m.field.as_slice().iter().all(|v| (v - 1.5).abs() < 1e-9));
        assert!(m.value < 1e-12);
    }

    #[test]
    fn gradient_criterion_met() {
        let cfg = small_config();
        let m = minimize(&inputs(), &cfg).unwrap();
        assert!(m.converged);
        assert!(m.gradient_norm <= cfg.cg_rel_tol * m.initial_gradient_norm);
        assert!(m.iterations <= cfg.max_iterations(&Grid::new(99.0, 101.0, TRADING_DAY, 9, 9).unwrap()));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let cfg = SolverConfig {
            cg_max_iters: Some(3),
            precondition: false,
            ..small_config()
        };
        let m = minimize(&inputs(), &cfg).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }

    #[test]
    fn start_field_shape_checked() {
        let cfg = small_config();
        let f = market_functional(&inputs(), &cfg).unwrap();
        assert!(minimize_from(&f, &GridField::zeros(9, 7), &cfg).is_err());
    }

    #[test]
    fn deterministic() {
        let cfg = small_config();
        let a = minimize(&inputs(), &cfg).unwrap();
        let b = minimize(&inputs(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditioned_and_plain_agree() {
        let cfg = small_config();
        let plain = SolverConfig {
            precondition: false,
            ..cfg
        };
        let a = minimize(&inputs(), &cfg).unwrap();
        let b = minimize(&inputs(), &plain).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.iterations < b.iterations);
        assert!(a.field.max_abs_diff(&b.field) < 1e-8);
    }

    #[test]
    fn probed_band_matches_unit_columns() {
        let cfg = small_config();
        let f = market_functional(&inputs(), &cfg).unwrap();
        let grid = f.grid();
        let (n_s, n_t) = grid.shape();
        let free: Vec<usize> = (0..n_s * n_t).filter(|&k| grid.is_free(k / n_t, k % n_t)).collect();
        let (bw, band) = assemble_band(&f, &free);
        let mut e = vec![0.0; n_s * n_t];
        let mut col = vec![0.0; n_s * n_t];
        for (c, &node) in free.iter().enumerate() {
            e[node] = 1.0;
            f.hessian_apply(&e, &mut col);
            e[node] = 0.0;
            for (r, &row) in free.iter().enumerate() {
                if r >= c && r - c <= bw {
                    assert_eq!(band[r * (bw + 1) + (r - c)], col[row]);
                } else if r > c {
                    assert_eq!(col[row], 0.0, "coupling outside band at ({r}, {c})");
                }
            }
        }
    }
}
