use crate::error::SolverError;
use crate::interp::ForecastInputs;

use super::SolverConfig;

/// Uniform tensor grid over [s_b, s_a] × [0, 2τ].
///
/// Both node counts are odd so the stock mid-point and t = τ are nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub s_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    pub ds: f64,
    pub dt: f64,
    pub tau: f64,
}

impl Grid {
    pub fn new(s_b: f64, s_a: f64, tau: f64, n_s: usize, n_t: usize) -> Result<Self, SolverError> {
        check_count("n_s", n_s)?;
        check_count("n_t", n_t)?;
        if !(s_b < s_a && s_b.is_finite() && s_a.is_finite()) {
            return Err(SolverError::Config(format!("empty stock interval [{s_b}, {s_a}]")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SolverError::Config(format!("tau must be positive, got {tau}")));
        }
        let ds = (s_a - s_b) / (n_s - 1) as f64;
        let dt = 2.0 * tau / (n_t - 1) as f64;
        let mut s_nodes: Vec<f64> = (0..n_s).map(|i| s_b + i as f64 * ds).collect();
        let mut t_nodes: Vec<f64> = (0..n_t).map(|j| j as f64 * dt).collect();
        // pin the nodes the forecast reads so they are exact
        s_nodes[(n_s - 1) / 2] = 0.5 * (s_b + s_a);
        s_nodes[n_s - 1] = s_a;
        t_nodes[(n_t - 1) / 2] = tau;
        t_nodes[n_t - 1] = 2.0 * tau;
        Ok(Self {
            s_nodes,
            t_nodes,
            ds,
            dt,
            tau,
        })
    }

    pub fn n_s(&self) -> usize {
        self.s_nodes.len()
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_s(), self.n_t())
    }

    pub fn s_b(&self) -> f64 {
        self.s_nodes[0]
    }

    pub fn s_a(&self) -> f64 {
        self.s_nodes[self.n_s() - 1]
    }

    /// Index of s_m = (s_b + s_a) / 2.
    pub fn mid_index(&self) -> usize {
        (self.n_s() - 1) / 2
    }

    /// Index of t = τ.
    pub fn tau_index(&self) -> usize {
        (self.n_t() - 1) / 2
    }

    /// Index of t = 2τ.
    pub fn top_index(&self) -> usize {
        self.n_t() - 1
    }

    /// Nodes fixed by the initial condition (j = 0) or the boundary conditions
    /// (i = 0 or i = N_s - 1) are constrained; everything else is free.
    pub fn is_free(&self, i: usize, j: usize) -> bool {
        j > 0 && i > 0 && i + 1 < self.n_s()
    }

    pub fn free_count(&self) -> usize {
        (self.n_s() - 2) * (self.n_t() - 1)
    }

    /// Samples `f(s, t)` at every node.
    pub fn sample(&self, mut f: impl FnMut(f64, f64) -> f64) -> GridField {
        let mut field = GridField::zeros(self.n_s(), self.n_t());
        for (i, &s) in self.s_nodes.iter().enumerate() {
            for (j, &t) in self.t_nodes.iter().enumerate() {
                field.set(i, j, f(s, t));
            }
        }
        field
    }
}

fn check_count(name: &str, n: usize) -> Result<(), SolverError> {
    if n < 5 || n % 2 == 0 {
        Err(SolverError::Config(format!("{name} must be odd and at least 5, got {n}")))
    } else {
        Ok(())
    }
}

/// Grid spanning the inputs' stock interval and [0, 2τ].
pub fn build_grid(inputs: &ForecastInputs, config: &SolverConfig) -> Result<Grid, SolverError> {
    Grid::new(inputs.s_b, inputs.s_a, inputs.tau, config.n_s, config.n_t)
}

/// Values on the grid; entry (i, j) approximates u(s_i, t_j).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n_s: usize,
    n_t: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(n_s: usize, n_t: usize) -> Self {
        Self::filled(n_s, n_t, 0.0)
    }

    pub fn filled(n_s: usize, n_t: usize, value: f64) -> Self {
        Self {
            n_s,
            n_t,
            values: vec![value; n_s * n_t],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_s, self.n_t)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_t + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.n_t + j] = value;
    }

    /// Row-major storage, s index outermost.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Values along t = t_j.
    pub fn time_row(&self, j: usize) -> Vec<f64> {
        (0..self.n_s).map(|i| self.get(i, j)).collect()
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_shape(&self, grid: &Grid) -> Result<(), SolverError> {
        if self.shape() == grid.shape() {
            Ok(())
        } else {
            Err(SolverError::ShapeMismatch {
                expected: grid.shape(),
                found: self.shape(),
            })
        }
    }
}
