//! Norm growth of the reversed heat equation on (0, π).

use std::f64::consts::FRAC_PI_2;

/// Squared L₂(0, π) norm of `Σ f_n sin(n x) e^{n² t}`:
/// `(π/2) Σ f_n² e^{2 n² t}`, with `coeffs[0]` being f₁.
pub fn reversed_heat_norm(coeffs: &[f64], t: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let n = (k + 1) as f64;
            f * f * (2.0 * n * n * t).exp()
        })
        .sum::<f64>()
        * FRAC_PI_2
}
