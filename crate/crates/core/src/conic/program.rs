use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use super::{Capabilities, ConicError};

/// Handle to a scalar decision variable of a [`ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a constraint, in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub usize);

/// Affine function `sum_i a_i x_i + c` of the decision variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    terms: Vec<(Var, f64)>,
    constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, coeff: f64) -> Self {
        Self {
            terms: vec![(v, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((v, coeff));
        }
    }

    pub fn with_term(mut self, v: Var, coeff: f64) -> Self {
        self.add_term(v, coeff);
        self
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// Raw terms; a variable may appear more than once.
    pub fn terms(&self) -> &[(Var, f64)] {
        &self.terms
    }

    /// Terms with duplicates merged, sorted by variable, zeros dropped.
    pub fn merged_terms(&self) -> Vec<(Var, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|(v, _)| *v);
        let mut out: Vec<(Var, f64)> = Vec::with_capacity(t.len());
        for (v, a) in t {
            match out.last_mut() {
                Some((w, b)) if *w == v => *b += a,
                _ => out.push((v, a)),
            }
        }
        out.retain(|(_, a)| *a != 0.0);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * x[v.0]).sum::<f64>() + self.constant
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|(v, _)| v.0).max()
    }
}

impl From<Var> for AffineExpr {
    fn from(v: Var) -> Self {
        AffineExpr::term(v, 1.0)
    }
}

impl From<f64> for AffineExpr {
    fn from(c: f64) -> Self {
        AffineExpr::constant(c)
    }
}

impl AddAssign<AffineExpr> for AffineExpr {
    fn add_assign(&mut self, rhs: AffineExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<AffineExpr>> Add<T> for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: T) -> AffineExpr {
        self += rhs.into();
        self
    }
}

impl<T: Into<AffineExpr>> Sub<T> for AffineExpr {
    type Output = AffineExpr;
    fn sub(mut self, rhs: T) -> AffineExpr {
        self += -rhs.into();
        self
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1.0
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, k: f64) -> AffineExpr {
        self.terms.iter_mut().for_each(|(_, a)| *a *= k);
        self.constant *= k;
        self
    }
}

impl<T: Into<AffineExpr>> Add<T> for Var {
    type Output = AffineExpr;
    fn add(self, rhs: T) -> AffineExpr {
        AffineExpr::from(self) + rhs
    }
}

impl<T: Into<AffineExpr>> Sub<T> for Var {
    type Output = AffineExpr;
    fn sub(self, rhs: T) -> AffineExpr {
        AffineExpr::from(self) - rhs
    }
}

impl Mul<f64> for Var {
    type Output = AffineExpr;
    fn mul(self, k: f64) -> AffineExpr {
        AffineExpr::term(self, k)
    }
}

/// The constraint classes a program can hold. Each one describes a convex set.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `expr >= 0`
    NonNegative(AffineExpr),
    /// `expr == 0`
    Equality(AffineExpr),
    /// `|| tail || <= head`
    SecondOrderCone {
        head: AffineExpr,
        tail: Vec<AffineExpr>,
    },
    /// `sum_i terms_i^2 <= bound`
    SumSquares {
        terms: Vec<AffineExpr>,
        bound: AffineExpr,
    },
    /// `exp(exponent) <= bound`
    Exponential {
        exponent: AffineExpr,
        bound: AffineExpr,
    },
}

impl Constraint {
    /// Amount by which `x` violates the constraint (zero when satisfied),
    /// computed directly from the constraint's defining inequality.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = match self {
            Constraint::NonNegative(e) => -e.eval(x),
            Constraint::Equality(e) => e.eval(x).abs(),
            Constraint::SecondOrderCone { head, tail } => {
                let n = tail.iter().map(|t| t.eval(x).powi(2)).sum::<f64>().sqrt();
                n - head.eval(x)
            }
            Constraint::SumSquares { terms, bound } => {
                terms.iter().map(|t| t.eval(x).powi(2)).sum::<f64>() - bound.eval(x)
            }
            Constraint::Exponential { exponent, bound } => exponent.eval(x).exp() - bound.eval(x),
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v.max(0.0)
        }
    }

    fn exprs(&self) -> Box<dyn Iterator<Item = &AffineExpr> + '_> {
        match self {
            Constraint::NonNegative(e) | Constraint::Equality(e) => Box::new(std::iter::once(e)),
            Constraint::SecondOrderCone { head, tail } => {
                Box::new(std::iter::once(head).chain(tail.iter()))
            }
            Constraint::SumSquares { terms, bound } => {
                Box::new(terms.iter().chain(std::iter::once(bound)))
            }
            Constraint::Exponential { exponent, bound } => Box::new([exponent, bound].into_iter()),
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Constraint::Exponential { .. })
    }

    pub fn is_conic(&self) -> bool {
        matches!(
            self,
            Constraint::SecondOrderCone { .. } | Constraint::SumSquares { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: Constraint,
}

/// A convex program: maximize a linear objective subject to linear,
/// second-order-cone, sum-of-squares and exponential constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    names: Vec<String>,
    objective: AffineExpr,
    constraints: Vec<LabeledConstraint>,
    capabilities: Capabilities,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProgram {
    /// An empty program accepting every constraint class.
    pub fn new() -> Self {
        Self::with_capabilities(Capabilities::all())
    }

    /// An empty program restricted to what a backend declares it can solve.
    pub fn with_capabilities(capabilities: Capabilities) -> Self {
        Self {
            names: Vec::new(),
            objective: AffineExpr::zero(),
            constraints: Vec::new(),
            capabilities,
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.names.push(name.into());
        Var(self.names.len() - 1)
    }

    /// Declares `len` scalars named `name[0]`, `name[1]`, ...
    pub fn add_vector(&mut self, name: &str, len: usize) -> Vec<Var> {
        (0..len)
            .map(|i| self.add_var(format!("{name}[{i}]")))
            .collect()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.names[v.0]
    }

    pub fn find_var(&self, name: &str) -> Option<Var> {
        self.names.iter().position(|n| n == name).map(Var)
    }

    pub fn maximize(&mut self, objective: impl Into<AffineExpr>) {
        self.objective = objective.into();
    }

    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[LabeledConstraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds a constraint of any class the program's capabilities allow.
    pub fn add(
        &mut self,
        label: impl Into<String>,
        constraint: Constraint,
    ) -> Result<ConstraintId, ConicError> {
        if constraint.is_exponential() && !self.capabilities.exponential {
            return Err(ConicError::BackendUnsupported("exponential cone"));
        }
        if constraint.is_conic() && !self.capabilities.second_order {
            return Err(ConicError::BackendUnsupported("second-order cone"));
        }
        if let Some(max) = constraint.exprs().filter_map(AffineExpr::max_var).max() {
            if max >= self.names.len() {
                return Err(ConicError::UndeclaredVariable(max));
            }
        }
        self.constraints.push(LabeledConstraint {
            label: label.into(),
            constraint,
        });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// `lhs >= rhs`.
    pub fn add_ge(
        &mut self,
        label: impl Into<String>,
        lhs: impl Into<AffineExpr>,
        rhs: impl Into<AffineExpr>,
    ) -> Result<ConstraintId, ConicError> {
        self.add(label, Constraint::NonNegative(lhs.into() - rhs.into()))
    }

    /// `lhs <= rhs`.
    pub fn add_le(
        &mut self,
        label: impl Into<String>,
        lhs: impl Into<AffineExpr>,
        rhs: impl Into<AffineExpr>,
    ) -> Result<ConstraintId, ConicError> {
        self.add_ge(label, rhs, lhs)
    }

    pub fn add_eq(
        &mut self,
        label: impl Into<String>,
        lhs: impl Into<AffineExpr>,
        rhs: impl Into<AffineExpr>,
    ) -> Result<ConstraintId, ConicError> {
        self.add(label, Constraint::Equality(lhs.into() - rhs.into()))
    }

    /// `sum_i terms_i^2 <= bound`.
    pub fn add_sum_squares_le(
        &mut self,
        label: impl Into<String>,
        terms: Vec<AffineExpr>,
        bound: impl Into<AffineExpr>,
    ) -> Result<ConstraintId, ConicError> {
        self.add(
            label,
            Constraint::SumSquares {
                terms,
                bound: bound.into(),
            },
        )
    }

    /// `exp(exponent) <= bound`.
    pub fn add_exp_le(
        &mut self,
        label: impl Into<String>,
        exponent: impl Into<AffineExpr>,
        bound: impl Into<AffineExpr>,
    ) -> Result<ConstraintId, ConicError> {
        self.add(
            label,
            Constraint::Exponential {
                exponent: exponent.into(),
                bound: bound.into(),
            },
        )
    }

    /// Total transmit power constraint `sum_i ||p_i||^2 <= p_t` over real
    /// (re/im interleaved) precoder variables.
    pub fn add_power_constraint(
        &mut self,
        precoder_vars: &[Var],
        p_t: f64,
    ) -> Result<ConstraintId, ConicError> {
        let terms = precoder_vars.iter().map(|&v| AffineExpr::from(v)).collect();
        self.add_sum_squares_le("power budget", terms, p_t)
    }

    /// Rate link `theta >= 2^(alpha / w)`, i.e. `exp(alpha ln2 / w) <= theta`.
    pub fn add_exp_rate_link(
        &mut self,
        alpha: Var,
        theta: Var,
        w: f64,
    ) -> Result<ConstraintId, ConicError> {
        let label = format!(
            "{} >= 2^({}/W)",
            self.var_name(theta).to_string(),
            self.var_name(alpha)
        );
        self.add_exp_le(label, alpha * (std::f64::consts::LN_2 / w), theta)
    }

    /// Largest violation over all constraints at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.constraint.violation(x))
            .fold(0.0, f64::max)
    }

    /// Constraints violated by more than `tol` at `x`.
    pub fn violations(&self, x: &[f64], tol: f64) -> Vec<(ConstraintId, f64)> {
        self.constraints
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let v = c.constraint.violation(x);
                (v > tol).then_some((ConstraintId(i), v))
            })
            .collect()
    }

    /// Drops the listed constraints, keeping variables and objective.
    pub fn without_constraints(&self, drop: &[ConstraintId]) -> Self {
        let mut out = self.clone();
        out.constraints = self
            .constraints
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(&ConstraintId(*i)))
            .map(|(_, c)| c.clone())
            .collect();
        out
    }

    pub(crate) fn replace_constraints(&mut self, constraints: Vec<LabeledConstraint>) {
        self.constraints = constraints;
    }

    fn fmt_expr(&self, e: &AffineExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = e.merged_terms();
        let mut first = true;
        for (v, a) in terms {
            let sign = if a < 0.0 { "-" } else { "+" };
            if first {
                if a < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            write!(f, "{:e}*{}", a.abs(), self.names[v.0])?;
        }
        if first {
            write!(f, "{:e}", e.constant)
        } else if e.constant != 0.0 {
            let sign = if e.constant < 0.0 { "-" } else { "+" };
            write!(f, " {sign} {:e}", e.constant.abs())
        } else {
            Ok(())
        }
    }

    fn fmt_list(&self, es: &[AffineExpr], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in es.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            self.fmt_expr(e, f)?;
        }
        write!(f, "]")
    }
}

/// Plain-text listing: variables, objective, then one constraint per line.
impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variables {}", self.names.len())?;
        for (i, n) in self.names.iter().enumerate() {
            writeln!(f, "  x{i} {n}")?;
        }
        write!(f, "maximize ")?;
        self.fmt_expr(&self.objective, f)?;
        writeln!(f)?;
        writeln!(f, "subject to {}", self.constraints.len())?;
        for (i, lc) in self.constraints.iter().enumerate() {
            write!(f, "  c{i} [{}] ", lc.label)?;
            match &lc.constraint {
                Constraint::NonNegative(e) => {
                    self.fmt_expr(e, f)?;
                    write!(f, " >= 0")?;
                }
                Constraint::Equality(e) => {
                    self.fmt_expr(e, f)?;
                    write!(f, " == 0")?;
                }
                Constraint::SecondOrderCone { head, tail } => {
                    write!(f, "norm")?;
                    self.fmt_list(tail, f)?;
                    write!(f, " <= ")?;
                    self.fmt_expr(head, f)?;
                }
                Constraint::SumSquares { terms, bound } => {
                    write!(f, "sumsq")?;
                    self.fmt_list(terms, f)?;
                    write!(f, " <= ")?;
                    self.fmt_expr(bound, f)?;
                }
                Constraint::Exponential { exponent, bound } => {
                    write!(f, "exp(")?;
                    self.fmt_expr(exponent, f)?;
                    write!(f, ") <= ")?;
                    self.fmt_expr(bound, f)?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
