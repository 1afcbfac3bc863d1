//! Well-posed backward-in-time march used to manufacture synthetic solutions.

use crate::error::SolverError;
use crate::interp::ForecastInputs;

use super::grid::{Grid, GridField};

/// Solves `u_t + (σ²/2) s² u_ss = 0` downward from t = 2τ to t = 0.
///
/// Each step is backward Euler in the marching direction,
/// `u_j − dt k_j D_ss u_j = u_{j+1}`, which makes the discrete residual of
/// [`apply_l`](super::apply_l) vanish on the produced field. Boundary values
/// come from the extrapolated bid (at s_b) and ask (at s_a); the top row is
/// `terminal` as given.
pub fn solve_wellposed_downward(
    terminal: &[f64],
    inputs: &ForecastInputs,
    grid: &Grid,
) -> Result<GridField, SolverError> {
    let lower: Vec<f64> = grid.t_nodes.iter().map(|&t| inputs.ub_poly.eval(t)).collect();
    let upper: Vec<f64> = grid.t_nodes.iter().map(|&t| inputs.ua_poly.eval(t)).collect();
    let sigma: Vec<f64> = grid.t_nodes.iter().map(|&t| inputs.sigma_at(t)).collect();
    march_downward(terminal, &lower, &upper, &sigma, grid)
}

/// Downward march with explicit boundary columns and volatility samples.
pub fn march_downward(
    terminal: &[f64],
    lower: &[f64],
    upper: &[f64],
    sigma: &[f64],
    grid: &Grid,
) -> Result<GridField, SolverError> {
    let (n_s, n_t) = grid.shape();
    for (len, expected) in [
        (terminal.len(), n_s),
        (lower.len(), n_t),
        (upper.len(), n_t),
        (sigma.len(), n_t),
    ] {
        if len != expected {
            return Err(SolverError::ShapeMismatch {
                expected: (1, expected),
                found: (1, len),
            });
        }
    }

    let mut u = GridField::zeros(n_s, n_t);
    for (i, &v) in terminal.iter().enumerate() {
        u.set(i, n_t - 1, v);
    }

    let m = n_s - 2;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let scale = grid.dt / (grid.ds * grid.ds);
    for j in (0..n_t - 1).rev() {
        for k in 0..m {
            let i = k + 1;
            let s = grid.s_nodes[i];
            let c = 0.5 * sigma[j] * sigma[j] * s * s * scale;
            sub[k] = -c;
            diag[k] = 1.0 + 2.0 * c;
            sup[k] = -c;
            rhs[k] = u.get(i, j + 1);
        }
        rhs[0] += sub[0].abs() * lower[j];
        rhs[m - 1] += sup[m - 1].abs() * upper[j];
        let row = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        u.set(0, j, lower[j]);
        u.set(n_s - 1, j, upper[j]);
        for (k, v) in row.into_iter().enumerate() {
            u.set(k + 1, j, v);
        }
    }
    Ok(u)
}

/// Thomas algorithm for a tridiagonal system. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(SolverError::Tridiagonal { row: 0, pivot });
    }
    c[0] = sup[0] / pivot;
    x[0] = rhs[0] / pivot;
    for k in 1..n {
        pivot = diag[k] - sub[k] * c[k - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(SolverError::Tridiagonal { row: k, pivot });
        }
        c[k] = sup[k] / pivot;
        x[k] = (rhs[k] - sub[k] * x[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        x[k] -= c[k] * x[k + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{fit_quadratic, QuadPoly, TRADING_DAY};
    use crate::solver::apply_l;
    use proptest::prelude::*;

    fn flat_inputs(s_b: f64, s_a: f64, ub: f64, ua: f64, sigma: f64) -> ForecastInputs {
        let tau = TRADING_DAY;
        ForecastInputs {
            ub_poly: QuadPoly::constant(ub, tau).unwrap(),
            ua_poly: QuadPoly::constant(ua, tau).unwrap(),
            sigma_poly: QuadPoly::constant(sigma, tau).unwrap(),
            s_b,
            s_a,
            tau,
        }
    }

    #[test]
    fn thomas_matches_hand_solution() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3 5 3] → x = [1 1 1]
        let x = solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0, 0.0], &[3.0, 5.0, 3.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let inp = flat_inputs(99.0, 101.0, 2.0, 2.0, 0.2);
        let g = Grid::new(99.0, 101.0, TRADING_DAY, 11, 11).unwrap();
        let u = solve_wellposed_downward(&[2.0; 11], &inp, &g).unwrap();
        assert!(u.as_slice().iter().all(|&v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn linear_in_s_stays_linear() {
        let inp = flat_inputs(99.0, 101.0, 99.0, 101.0, 0.2);
        let g = Grid::new(99.0, 101.0, TRADING_DAY, 11, 11).unwrap();
        let u = solve_wellposed_downward(&g.s_nodes, &inp, &g).unwrap();
        for (i, &s) in g.s_nodes.iter().enumerate() {
            for j in 0..11 {
                assert!((u.get(i, j) - s).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn produced_field_has_zero_residual() {
        let tau = TRADING_DAY;
        let inp = ForecastInputs::new(
            fit_quadratic(1.90, 1.95, 2.0, tau).unwrap(),
            fit_quadratic(2.1, 2.16, 2.2, tau).unwrap(),
            fit_quadratic(0.22, 0.21, 0.2, tau).unwrap(),
            99.0,
            101.0,
        )
        .unwrap();
        let g = Grid::new(99.0, 101.0, tau, 11, 11).unwrap();
        let terminal: Vec<f64> = g.s_nodes.iter().map(|s| 2.0 + 0.4 * (s - 99.0) * (101.0 - s)).collect();
        let u = solve_wellposed_downward(&terminal, &inp, &g).unwrap();
        let r = apply_l(&u, &g, &inp.sigma_poly).unwrap();
        let worst = r.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-7, "{worst}");
    }

    proptest! {
        #[test]
        fn maximum_principle(
            terminal in prop::collection::vec(0.5f64..3.0, 9),
            lo in 0.5f64..3.0,
            hi in 0.5f64..3.0,
            sigma in 0.05f64..1.0,
        ) {
            let inp = flat_inputs(40.0, 42.0, lo, hi, sigma);
            let g = Grid::new(40.0, 42.0, TRADING_DAY, 9, 9).unwrap();
            let u = solve_wellposed_downward(&terminal, &inp, &g).unwrap();
            let min = terminal.iter().copied().fold(lo.min(hi), f64::min);
            let max = terminal.iter().copied().fold(lo.max(hi), f64::max);
            for &v in u.as_slice() {
                prop_assert!(v >= min - 1e-12 && v <= max + 1e-12);
            }
        }
    }
}
