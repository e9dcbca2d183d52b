use super::{
    Capabilities, ConicBackend, ConicError, ConicProgram, ConicSolution, Constraint,
    LabeledConstraint, SolveStatus,
};
use crate::conic::AffineExpr;

/// Handles `exp(a) <= b` constraints on top of a backend without exponential
/// cones by successive linearization: each exponential constraint is replaced
/// by tangent cuts `e^{a0} (1 + a - a0) <= b`, and a new cut is added at the
/// current exponent whenever the returned point violates the constraint.
///
/// Cuts are outer approximations, so the final point may violate an
/// exponential constraint by at most `tol` (relative to `max(1, |b|)`).
#[derive(Debug, Clone)]
pub struct ExpCuttingPlanes<B> {
    inner: B,
    pub tol: f64,
    pub max_rounds: usize,
}

impl<B: ConicBackend> ExpCuttingPlanes<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            tol: 1e-9,
            max_rounds: 100,
        }
    }
}

fn tangent_cut(exponent: &AffineExpr, bound: &AffineExpr, at: f64) -> Constraint {
    let slope = at.exp();
    // bound - slope * (1 - at + exponent) >= 0
    let rhs = (exponent.clone() + (1.0 - at)) * slope;
    Constraint::NonNegative(bound.clone() - rhs)
}

impl<B: ConicBackend> ConicBackend for ExpCuttingPlanes<B> {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            exponential: true,
            ..self.inner.capabilities()
        }
    }

    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution, ConicError> {
        let mut base = Vec::new();
        let mut exps = Vec::new();
        for lc in program.constraints() {
            match &lc.constraint {
                Constraint::Exponential { exponent, bound } => {
                    exps.push((lc.label.clone(), exponent.clone(), bound.clone()))
                }
                _ => base.push(lc.clone()),
            }
        }
        let mut cuts: Vec<LabeledConstraint> = exps
            .iter()
            .map(|(label, e, b)| LabeledConstraint {
                label: format!("{label} cut@0"),
                constraint: tangent_cut(e, b, 0.0),
            })
            .collect();

        let mut relaxed = program.clone();
        let mut iterations = 0;
        for _ in 0..self.max_rounds {
            let mut constraints = base.clone();
            constraints.extend(cuts.iter().cloned());
            relaxed.replace_constraints(constraints);
            let sol = self.inner.solve(&relaxed)?;
            iterations += sol.solver_iterations;
            let Some(x) = sol.assignment.as_ref() else {
                return Ok(ConicSolution::failed(sol.status, iterations));
            };
            let mut converged = true;
            for (label, e, b) in &exps {
                let a = e.eval(x);
                let excess = a.exp() - b.eval(x);
                if excess > self.tol * b.eval(x).abs().max(1.0) {
                    converged = false;
                    cuts.push(LabeledConstraint {
                        label: format!("{label} cut@{a:.6}"),
                        constraint: tangent_cut(e, b, a),
                    });
                }
            }
            if converged {
                return Ok(ConicSolution {
                    solver_iterations: iterations,
                    ..sol
                });
            }
        }
        Ok(ConicSolution::failed(
            SolveStatus::NumericalFailure,
            iterations,
        ))
    }
}
