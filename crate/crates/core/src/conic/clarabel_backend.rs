use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{
    Capabilities, ConicBackend, ConicError, ConicProgram, ConicSolution, Constraint, SolveStatus,
    FEAS_TOL, GAP_TOL,
};
use crate::conic::AffineExpr;

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
    exponential: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self {
            tol_feas: FEAS_TOL,
            tol_gap: GAP_TOL,
            max_iter: 200,
            exponential: true,
        }
    }
}

impl ClarabelBackend {
    /// Same solver with exponential cones masked off; used to exercise the
    /// cutting-plane fallback.
    pub fn without_exponential() -> Self {
        Self {
            exponential: false,
            ..Self::default()
        }
    }
}

/// Row-wise builder for `A x + s = b, s in K`.
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Rows {
    /// Appends a slack row `s = expr(x)`.
    fn push(&mut self, e: &AffineExpr) {
        let row = self.b.len();
        for (var, a) in e.merged_terms() {
            self.i.push(row);
            self.j.push(var.index());
            self.v.push(-a);
        }
        self.b.push(e.constant_part());
    }

    fn cone(&mut self, cone: SupportedConeT<f64>) {
        use SupportedConeT::*;
        match (self.cones.last_mut(), &cone) {
            (Some(NonnegativeConeT(n)), NonnegativeConeT(m)) => *n += m,
            (Some(ZeroConeT(n)), ZeroConeT(m)) => *n += m,
            _ => self.cones.push(cone),
        }
    }
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        _ => SolveStatus::NumericalFailure,
    }
}

impl ConicBackend for ClarabelBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            second_order: true,
            exponential: self.exponential,
        }
    }

    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution, ConicError> {
        let n = program.num_vars();
        let mut rows = Rows {
            i: Vec::new(),
            j: Vec::new(),
            v: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        };
        for lc in program.constraints() {
            match &lc.constraint {
                Constraint::NonNegative(e) => {
                    rows.push(e);
                    rows.cone(SupportedConeT::NonnegativeConeT(1));
                }
                Constraint::Equality(e) => {
                    rows.push(e);
                    rows.cone(SupportedConeT::ZeroConeT(1));
                }
                Constraint::SecondOrderCone { head, tail } => {
                    rows.push(head);
                    tail.iter().for_each(|t| rows.push(t));
                    rows.cone(SupportedConeT::SecondOrderConeT(1 + tail.len()));
                }
                Constraint::SumSquares { terms, bound } => {
                    // sum a_i^2 <= r  <=>  ||((r-1)/2, a)|| <= (r+1)/2
                    rows.push(&((bound.clone() + 1.0) * 0.5));
                    rows.push(&((bound.clone() - 1.0) * 0.5));
                    terms.iter().for_each(|t| rows.push(t));
                    rows.cone(SupportedConeT::SecondOrderConeT(2 + terms.len()));
                }
                Constraint::Exponential { exponent, bound } => {
                    if !self.exponential {
                        return Err(ConicError::BackendUnsupported("exponential cone"));
                    }
                    // (x, y, z) with y exp(x/y) <= z, y fixed to 1
                    rows.push(exponent);
                    rows.push(&AffineExpr::constant(1.0));
                    rows.push(bound);
                    rows.cone(SupportedConeT::ExponentialConeT());
                }
            }
        }

        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for (var, c) in program.objective().merged_terms() {
            q[var.index()] -= c;
        }

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_gap)
            .tol_gap_rel(self.tol_gap)
            .presolve_enable(false)
            .build()
            .map_err(|e| ConicError::BadProblemData(e.to_string()))?;

        let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &rows.cones, settings)
            .map_err(|e| ConicError::BadProblemData(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = map_status(sol.status);
        if status != SolveStatus::Optimal {
            return Ok(ConicSolution::failed(status, sol.iterations));
        }
        let x = sol.x.clone();
        Ok(ConicSolution {
            status,
            objective_value: program.objective().eval(&x),
            assignment: Some(x),
            solver_iterations: sol.iterations,
        })
    }
}
