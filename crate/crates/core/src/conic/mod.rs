//! Convex subproblems and the solvers behind them.
//!
//! A [`ConicProgram`] is built from named real scalars, a linear objective
//! to maximize and constraints drawn from a fixed set of convex classes
//! (linear, second-order cone, sum of squares bounded by an affine function,
//! exponential bounded by an affine function). Any type implementing
//! [`ConicBackend`] can solve it. The default backend is
//! [`ClarabelBackend`]; [`ExpCuttingPlanes`] adds exponential constraints to
//! a backend that only handles linear and second-order cones.

mod clarabel_backend;
mod cutting;
mod program;

use thiserror::Error;

pub use clarabel_backend::ClarabelBackend;
pub use cutting::ExpCuttingPlanes;
pub use program::{AffineExpr, ConicProgram, Constraint, ConstraintId, LabeledConstraint, Var};

/// Default primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-10;
/// Default relative duality-gap tolerance.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("backend does not support {0} constraints")]
    BackendUnsupported(&'static str),
    #[error("constraint references undeclared variable x{0}")]
    UndeclaredVariable(usize),
    #[error("backend rejected the problem data: {0}")]
    BadProblemData(String),
}

/// Constraint classes a backend can handle natively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub second_order: bool,
    pub exponential: bool,
}

impl Capabilities {
    pub fn all() -> Self {
        Self {
            second_order: true,
            exponential: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

/// Outcome of a solve. `assignment` is present iff `status` is `Optimal`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub assignment: Option<Vec<f64>>,
    pub solver_iterations: u32,
}

impl ConicSolution {
    pub fn failed(status: SolveStatus, iterations: u32) -> Self {
        Self {
            status,
            objective_value: f64::NAN,
            assignment: None,
            solver_iterations: iterations,
        }
    }

    pub fn value(&self, v: Var) -> Option<f64> {
        self.assignment.as_ref().map(|x| x[v.index()])
    }
}

/// A convex solver able to handle [`ConicProgram`]s.
pub trait ConicBackend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution, ConicError>;

    /// Empty program restricted to this backend's capabilities.
    fn new_program(&self) -> ConicProgram {
        ConicProgram::with_capabilities(self.capabilities())
    }
}

/// Solves with the default backend.
pub fn solve(program: &ConicProgram) -> Result<ConicSolution, ConicError> {
    ClarabelBackend::default().solve(program)
}
