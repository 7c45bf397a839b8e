//! Piecewise-linear convex models, their LP lowering, and the LP solver.

mod lp;
mod lu;
mod model;
mod simplex;

pub use lp::{LinearProgram, LpSolution, LpStatus, Row, Sense};
pub use model::{Cmp, LinExpr, LoweredModel, ModelSolution, PwlModel, VarId};
pub use simplex::solve_lp;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute primal feasibility target (ε_feas).
    pub feasibility: f64,
    /// Absolute objective / reduced-cost target (ε_obj).
    pub optimality: f64,
    /// Defaults to a bound proportional to the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            optimality: 1e-7,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize },
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("problem is {0:?}")]
    NotOptimal(LpStatus),
}
