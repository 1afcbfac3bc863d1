//! Banded Cholesky factor of the Hessian on the free nodes, used as a
//! conjugate-gradient preconditioner.
//!
//! Free nodes are numbered row-major over i = 1..n_s-1, j = 1..n_t, so every
//! stencil coupling (at most two steps in s, or one step in each direction)
//! stays within a half-bandwidth of 2 (n_t - 1).

use super::functional::RegularizedFunctional;

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// Row r holds L[r][r - k] at r * (bw + 1) + k.
    lower: Vec<f64>,
}

impl BandCholesky {
    /// Factors a symmetric band matrix given by its lower band in the same
    /// layout as `lower`. Returns `None` on a non-positive pivot.
    pub fn factor(n: usize, bw: usize, mut a: Vec<f64>) -> Option<Self> {
        let w = bw + 1;
        for j in 0..n {
            for i in j..n.min(j + w) {
                let k0 = i.saturating_sub(bw);
                let mut sum = a[i * w + (i - j)];
                for k in k0..j {
                    sum -= a[i * w + (i - k)] * a[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0 && sum.is_finite()) {
                        return None;
                    }
                    a[j * w] = sum.sqrt();
                } else {
                    a[i * w + (i - j)] = sum / a[j * w];
                }
            }
        }
        Some(Self { n, bw, lower: a })
    }

    /// Solves L Lᵀ x = b in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut sum = x[i];
            for k in i.saturating_sub(self.bw)..i {
                sum -= self.lower[i * w + (i - k)] * x[k];
            }
            x[i] = sum / self.lower[i * w];
        }
        for i in (0..self.n).rev() {
            let mut sum = x[i];
            for r in i + 1..self.n.min(i + w) {
                sum -= self.lower[r * w + (r - i)] * x[r];
            }
            x[i] = sum / self.lower[i * w];
        }
    }
}

/// Lower band of the free-node Hessian, assembled by probing with one
/// direction per residue class modulo 2·bw + 1.
pub(crate) fn assemble_band(functional: &RegularizedFunctional, free: &[usize]) -> (usize, Vec<f64>) {
    let (n_s, n_t) = functional.grid().shape();
    let n = free.len();
    let bw = (2 * (n_t - 1)).min(n.saturating_sub(1));
    let period = 2 * bw + 1;
    let w = bw + 1;
    let mut band = vec![0.0; n * w];
    let mut dir = vec![0.0; n_s * n_t];
    let mut out = vec![0.0; n_s * n_t];
    for color in 0..period.min(n) {
        dir.iter_mut().for_each(|x| *x = 0.0);
        for col in (color..n).step_by(period) {
            dir[free[col]] = 1.0;
        }
        functional.hessian_apply(&dir, &mut out);
        for (r, &node) in free.iter().enumerate() {
            // the unique probed column within distance bw of r
            let lo = r.saturating_sub(bw);
            let col = lo + (color + period - lo % period) % period;
            if col <= r && col < n {
                band[r * w + (r - col)] = out[node];
            }
        }
    }
    (bw, band)
}
