//! Numerical engines: an interior-point solver for the perspective-quadratic
//! transport program and a dense simplex LP solver.

pub mod cone;
pub mod lp;
mod perspective;

pub use lp::{DenseLp, LpOutcome, LpSolution};
pub use perspective::{solve_perspective, PerspectiveProgram};

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SolverOptions {
    /// Absolute and relative tolerance on primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iters: usize,
    /// Cells with `gamma < support_threshold * max gamma` are dropped from plans.
    pub support_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 500, support_threshold: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub mu: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConicSolution {
    /// Cell `(i, j)` is stored at index `i * n + j`.
    pub gamma: Vec<f64>,
    /// `m_ij = gamma_ij z_ij`, one vector per cell.
    pub m: Vec<Vec<f64>>,
    pub duals_a: Vec<f64>,
    pub duals_b: Vec<f64>,
    pub duals_p: Vec<Vec<f64>>,
    pub duals_q: Vec<Vec<f64>>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub status: Status,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub log: Vec<IterRecord>,
}

impl ConicSolution {
    pub fn gap(&self) -> f64 {
        (self.primal_value - self.dual_value).abs()
    }
}
