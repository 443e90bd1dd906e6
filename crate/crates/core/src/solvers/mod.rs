//! Self-contained dense solvers: a two-phase simplex for linear programs, a
//! log-barrier interior-point method for convex conic/quadratic programs, and
//! a brute-force enumerator for tiny mixed-binary models. Every oracle in the
//! toolkit reduces to these three.

mod barrier;
mod brute;
mod simplex;

pub use barrier::{solve_socp, ConeRow, QuadConstraintRow, SocpProblem};
pub use brute::solve_bruteforce;
pub use simplex::{solve_lp, LpProblem};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

/// Outcome of any solver. `value`/`point` are meaningful for `Optimal` (and
/// best-effort for `NumericalLimit`); residuals certify the claim:
/// `primal_residual` is the worst constraint violation at `point`,
/// `dual_gap` is `|primal − dual|` for the simplex and the barrier
/// suboptimality bound `μ·(#barrier terms)` for the interior-point method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub value: f64,
    pub point: Vec<f64>,
    pub primal_residual: f64,
    pub dual_gap: f64,
    /// Simplex only: one multiplier per row (equalities first, then
    /// inequalities), oriented so the dual objective bounds the primal from
    /// the optimization direction's side. Empty for other solvers.
    pub row_duals: Vec<f64>,
    pub iterations: usize,
}

impl SolveResult {
    pub(crate) fn failed(status: SolveStatus, num_vars: usize) -> Self {
        SolveResult {
            status,
            value: f64::NAN,
            point: vec![0.0; num_vars],
            primal_residual: f64::NAN,
            dual_gap: f64::NAN,
            row_duals: Vec::new(),
            iterations: 0,
        }
    }
}
