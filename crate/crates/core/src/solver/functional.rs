//! The discrete Black-Scholes operator and the regularized least-squares
//! functional
//!
//! ```text
//! J(u) = Σ r(i,j)² ds dt + α ‖u − F‖²_H²
//! ```
//!
//! where `r = D_t u + (σ²/2) s² D_ss u` is the residual of the forward-in-time
//! equation. The H² penalty is measured in normalized coordinates
//! x = (s − s_b)/(s_a − s_b) and θ = t/τ so that its six terms (value, two first
//! differences, three second differences) have comparable weight regardless of
//! the physical size of the rectangle.

use crate::error::SolverError;
use crate::interp::{clamped_sigma, QuadPoly};

use super::grid::{Grid, GridField};

/// One squared difference term of the penalty: a stencil of `(di, dj, coeff)`
/// taps applied at every anchor node `(i, j)` in the given ranges.
#[derive(Debug, Clone)]
struct Stencil {
    taps: Vec<(usize, usize, f64)>,
    i_range: (usize, usize),
    j_range: (usize, usize),
}

impl Stencil {
    #[inline]
    fn apply(&self, w: &[f64], n_t: usize, i: usize, j: usize) -> f64 {
        self.taps
            .iter()
            .map(|&(di, dj, c)| c * w[(i + di) * n_t + (j + dj)])
            .sum()
    }
}

/// Penalty stencils on an `n_s × n_t` grid. Taps are offsets from the
/// lower-left node of each stencil, so all offsets are non-negative.
fn penalty_stencils(n_s: usize, n_t: usize) -> Vec<Stencil> {
    let hx = 1.0 / (n_s - 1) as f64;
    let ht = 2.0 / (n_t - 1) as f64;
    let (ix, it) = (1.0 / hx, 1.0 / ht);
    let (ixx, itt) = (ix * ix, it * it);
    let ixt = ix * it;
    vec![
        Stencil {
            taps: vec![(0, 0, 1.0)],
            i_range: (0, n_s),
            j_range: (0, n_t),
        },
        Stencil {
            taps: vec![(0, 0, -ix), (1, 0, ix)],
            i_range: (0, n_s - 1),
            j_range: (0, n_t),
        },
        Stencil {
            taps: vec![(0, 0, -it), (0, 1, it)],
            i_range: (0, n_s),
            j_range: (0, n_t - 1),
        },
        Stencil {
            taps: vec![(0, 0, ixx), (1, 0, -2.0 * ixx), (2, 0, ixx)],
            i_range: (0, n_s - 2),
            j_range: (0, n_t),
        },
        Stencil {
            taps: vec![(0, 0, itt), (0, 1, -2.0 * itt), (0, 2, itt)],
            i_range: (0, n_s),
            j_range: (0, n_t - 2),
        },
        Stencil {
            taps: vec![(0, 0, ixt), (1, 0, -ixt), (0, 1, -ixt), (1, 1, ixt)],
            i_range: (0, n_s - 1),
            j_range: (0, n_t - 1),
        },
    ]
}

fn penalty_weight(n_s: usize, n_t: usize) -> f64 {
    (1.0 / (n_s - 1) as f64) * (2.0 / (n_t - 1) as f64)
}

/// Squared discrete H² norm of `w`, in the normalized coordinates used by the penalty.
pub fn h2_norm_sq(w: &GridField) -> f64 {
    let (n_s, n_t) = w.shape();
    let v = w.as_slice();
    let mut total = 0.0;
    for st in penalty_stencils(n_s, n_t) {
        for i in st.i_range.0..st.i_range.1 {
            for j in st.j_range.0..st.j_range.1 {
                let d = st.apply(v, n_t, i, j);
                total += d * d;
            }
        }
    }
    total * penalty_weight(n_s, n_t)
}

/// σ(t_j) sampled from the extrapolated quadratic, with the positivity clamp.
pub fn sigma_samples(sigma_poly: &QuadPoly, grid: &Grid) -> Vec<f64> {
    grid.t_nodes.iter().map(|&t| clamped_sigma(sigma_poly, t)).collect()
}

/// Discrete residual of `u_t + (σ²/2) s² u_ss`.
///
/// Forward difference in t, central second difference in s, evaluated at
/// interior i and j ≤ N_t − 2; zero elsewhere.
pub fn apply_l(u: &GridField, grid: &Grid, sigma_poly: &QuadPoly) -> Result<GridField, SolverError> {
    u.check_shape(grid)?;
    let sigma = sigma_samples(sigma_poly, grid);
    let coeffs = DiffusionCoeffs::new(grid, &sigma);
    let mut r = GridField::zeros(grid.n_s(), grid.n_t());
    let v = u.as_slice();
    let n_t = grid.n_t();
    for i in 1..grid.n_s() - 1 {
        for j in 0..n_t - 1 {
            r.set(i, j, coeffs.residual(v, n_t, i, j));
        }
    }
    Ok(r)
}

/// Per-node diffusion factor `(σ_j² / 2) s_i² / ds²` plus `1/dt`.
#[derive(Debug, Clone)]
struct DiffusionCoeffs {
    k: Vec<f64>,
    inv_dt: f64,
}

impl DiffusionCoeffs {
    fn new(grid: &Grid, sigma: &[f64]) -> Self {
        let n_t = grid.n_t();
        let inv_ds2 = 1.0 / (grid.ds * grid.ds);
        let mut k = vec![0.0; grid.n_s() * n_t];
        for (i, &s) in grid.s_nodes.iter().enumerate() {
            for (j, &sig) in sigma.iter().enumerate() {
                k[i * n_t + j] = 0.5 * sig * sig * s * s * inv_ds2;
            }
        }
        Self {
            k,
            inv_dt: 1.0 / grid.dt,
        }
    }

    #[inline]
    fn residual(&self, v: &[f64], n_t: usize, i: usize, j: usize) -> f64 {
        let c = i * n_t + j;
        (v[c + 1] - v[c]) * self.inv_dt + self.k[c] * (v[c + n_t] - 2.0 * v[c] + v[c - n_t])
    }
}

/// The regularized functional for one problem instance: grid, volatility
/// samples, reference field and regularization weight.
///
/// Constrained nodes (row j = 0 and columns i = 0, N_s − 1) take their values
/// from the reference field, which must already satisfy the initial and
/// boundary conditions.
#[derive(Debug, Clone)]
pub struct RegularizedFunctional {
    grid: Grid,
    sigma: Vec<f64>,
    reference: GridField,
    alpha: f64,
    coeffs: DiffusionCoeffs,
    stencils: Vec<Stencil>,
    residual_weight: f64,
    penalty_weight: f64,
}

impl RegularizedFunctional {
    pub fn new(grid: Grid, sigma: Vec<f64>, reference: GridField, alpha: f64) -> Result<Self, SolverError> {
        reference.check_shape(&grid)?;
        if sigma.len() != grid.n_t() {
            return Err(SolverError::ShapeMismatch {
                expected: (1, grid.n_t()),
                found: (1, sigma.len()),
            });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SolverError::Config(format!("alpha must be positive, got {alpha}")));
        }
        let coeffs = DiffusionCoeffs::new(&grid, &sigma);
        let stencils = penalty_stencils(grid.n_s(), grid.n_t());
        let residual_weight = grid.ds * grid.dt;
        let penalty_weight = penalty_weight(grid.n_s(), grid.n_t());
        Ok(Self {
            grid,
            sigma,
            reference,
            alpha,
            coeffs,
            stencils,
            residual_weight,
            penalty_weight,
        })
    }

    /// Functional with σ taken from a volatility polynomial.
    pub fn with_sigma_poly(
        grid: Grid,
        sigma_poly: &QuadPoly,
        reference: GridField,
        alpha: f64,
    ) -> Result<Self, SolverError> {
        let sigma = sigma_samples(sigma_poly, &grid);
        Self::new(grid, sigma, reference, alpha)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn reference(&self) -> &GridField {
        &self.reference
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// J(u).
    pub fn value(&self, u: &GridField) -> Result<f64, SolverError> {
        u.check_shape(&self.grid)?;
        let (n_s, n_t) = self.grid.shape();
        let v = u.as_slice();

        let mut residual = 0.0;
        for i in 1..n_s - 1 {
            for j in 0..n_t - 1 {
                let r = self.coeffs.residual(v, n_t, i, j);
                residual += r * r;
            }
        }

        let w: Vec<f64> = v.iter().zip(self.reference.as_slice()).map(|(a, b)| a - b).collect();
        let mut penalty = 0.0;
        for st in &self.stencils {
            for i in st.i_range.0..st.i_range.1 {
                for j in st.j_range.0..st.j_range.1 {
                    let d = st.apply(&w, n_t, i, j);
                    penalty += d * d;
                }
            }
        }
        Ok(residual * self.residual_weight + self.alpha * self.penalty_weight * penalty)
    }

    /// ∂J/∂u at free nodes; exactly zero at constrained nodes.
    pub fn gradient(&self, u: &GridField) -> Result<GridField, SolverError> {
        u.check_shape(&self.grid)?;
        let mut out = GridField::zeros(self.grid.n_s(), self.grid.n_t());
        self.gradient_into(u.as_slice(), Some(self.reference.as_slice()), out.as_mut_slice());
        Ok(out)
    }

    /// Gradient of the homogeneous quadratic part (reference taken as zero)
    /// evaluated at `direction`, i.e. the Hessian applied to it. Constrained
    /// entries of the result are zero.
    pub(crate) fn hessian_apply(&self, direction: &[f64], out: &mut [f64]) {
        self.gradient_into(direction, None, out);
    }

    fn gradient_into(&self, v: &[f64], reference: Option<&[f64]>, out: &mut [f64]) {
        let (n_s, n_t) = self.grid.shape();
        out.iter_mut().for_each(|x| *x = 0.0);

        let rw = 2.0 * self.residual_weight;
        let inv_dt = self.coeffs.inv_dt;
        for i in 1..n_s - 1 {
            for j in 0..n_t - 1 {
                let c = i * n_t + j;
                let r = rw * self.coeffs.residual(v, n_t, i, j);
                let k = self.coeffs.k[c];
                out[c + 1] += r * inv_dt;
                out[c] -= r * (inv_dt + 2.0 * k);
                out[c + n_t] += r * k;
                out[c - n_t] += r * k;
            }
        }

        let w: Vec<f64> = match reference {
            Some(f) => v.iter().zip(f).map(|(a, b)| a - b).collect(),
            None => v.to_vec(),
        };
        let pw = 2.0 * self.alpha * self.penalty_weight;
        for st in &self.stencils {
            for i in st.i_range.0..st.i_range.1 {
                for j in st.j_range.0..st.j_range.1 {
                    let d = pw * st.apply(&w, n_t, i, j);
                    for &(di, dj, coeff) in &st.taps {
                        out[(i + di) * n_t + (j + dj)] += d * coeff;
                    }
                }
            }
        }

        for i in 0..n_s {
            for j in 0..n_t {
                if !self.grid.is_free(i, j) {
                    out[i * n_t + j] = 0.0;
                }
            }
        }
    }
}

/// J_α(u) for reference field `reference`.
pub fn functional(
    u: &GridField,
    reference: &GridField,
    grid: &Grid,
    sigma_poly: &QuadPoly,
    alpha: f64,
) -> Result<f64, SolverError> {
    u.check_shape(grid)?;
    RegularizedFunctional::with_sigma_poly(grid.clone(), sigma_poly, reference.clone(), alpha)?.value(u)
}

/// ∇J_α(u), zero at constrained nodes.
pub fn gradient(
    u: &GridField,
    reference: &GridField,
    grid: &Grid,
    sigma_poly: &QuadPoly,
    alpha: f64,
) -> Result<GridField, SolverError> {
    u.check_shape(grid)?;
    RegularizedFunctional::with_sigma_poly(grid.clone(), sigma_poly, reference.clone(), alpha)?.gradient(u)
}
