//! Sparse nonlinear programming: problem interface and a primal-dual
//! interior-point solver with a filter line search.

mod ipm;
pub mod ldl;

pub use ipm::{IpmOptions, IpmSolver};

use serde::{Deserialize, Serialize};

/// `min f(x)` subject to `x_l <= x <= x_u` and `g_l <= g(x) <= g_u`.
///
/// Rows with `g_l == g_u` are equality constraints. Infinite bounds are
/// expressed with `f64::INFINITY`. Hessian entries are lower-triangular
/// (`row >= col`) coordinates of `obj_factor * d2f + sum_j y_j d2g_j`.
pub trait Nlp {
    fn n_vars(&self) -> usize;
    fn n_cons(&self) -> usize;
    fn var_bounds(&self, lower: &mut [f64], upper: &mut [f64]);
    fn con_bounds(&self, lower: &mut [f64], upper: &mut [f64]);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], g: &mut [f64]);
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]);
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    fn hessian_values(&self, x: &[f64], obj_factor: f64, y: &[f64], vals: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    /// Converged to the relaxed tolerance only.
    Acceptable,
    MaxIterations,
    LineSearchFailed,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Solved | SolveStatus::Acceptable)
    }
}

/// Primal-dual iterate, also used as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    /// Constraint multipliers (`grad f + J^T y - z_l + z_u = 0`).
    pub y: Vec<f64>,
    pub z_l: Vec<f64>,
    pub z_u: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Unscaled optimality error at the returned point.
    pub kkt_error: f64,
    /// Largest constraint violation at the returned point.
    pub infeasibility: f64,
}
