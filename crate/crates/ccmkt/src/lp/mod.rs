//! Linear programs with named rows and columns, a bundled revised simplex
//! solver that reports dual multipliers, a KKT verifier and LP-format export.
//!
//! Sign convention: problems are minimizations with rows `a·x ≥ b` or
//! `a·x = b`. Row duals `y` satisfy `c − Aᵀy = d` where `d` are the reduced
//! costs, so duals of `≥` rows are nonnegative at an optimum and equality
//! duals are free.

mod export;
pub mod face;
pub mod factor;
mod kkt;
mod simplex;

use std::collections::HashMap;
use std::fmt;

pub use export::write_lp_format;
pub use kkt::{check_kkt, KktReport};
pub use simplex::RevisedSimplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
    pub terms: Vec<(VarId, f64)>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate row name `{0}`")]
    DuplicateRow(String),
    #[error("row `{row}` references undeclared variable index {var}")]
    UnknownVariable { row: String, var: usize },
    #[error("non-finite data in `{0}`")]
    NonFinite(String),
    #[error("variable `{0}` has lower bound above upper bound")]
    EmptyBounds(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

/// A minimization LP. Variables default to `[0, ∞)`; angles and other
/// unrestricted quantities use `add_free_var`.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    var_names: HashMap<String, VarId>,
    row_names: HashMap<String, RowId>,
    errors: Vec<LpError>,
    offset: f64,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    /// Adds a variable with bounds `[lower, upper]`.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        let name = name.into();
        let id = VarId(self.vars.len());
        if !cost.is_finite() || lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            self.errors.push(LpError::NonFinite(name.clone()));
        }
        if lower > upper {
            self.errors.push(LpError::EmptyBounds(name.clone()));
        }
        if self.var_names.insert(name.clone(), id).is_some() {
            self.errors.push(LpError::DuplicateVariable(name.clone()));
        }
        self.vars.push(Variable { name, lower, upper, cost });
        id
    }

    pub fn add_nonneg_var(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY, cost)
    }

    pub fn add_free_var(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn add_row(&mut self, name: impl Into<String>, kind: RowKind, terms: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        let name = name.into();
        let id = RowId(self.rows.len());
        if !rhs.is_finite() || terms.iter().any(|(_, a)| !a.is_finite()) {
            self.errors.push(LpError::NonFinite(name.clone()));
        }
        if let Some((v, _)) = terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            self.errors.push(LpError::UnknownVariable { row: name.clone(), var: v.0 });
        }
        if self.row_names.insert(name.clone(), id).is_some() {
            self.errors.push(LpError::DuplicateRow(name.clone()));
        }
        self.rows.push(Row { name, kind, rhs, terms });
        id
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.vars[var.0].cost = cost;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.rows[row.0].rhs = rhs;
    }

    /// Constant added to the objective.
    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.row_names.get(name).copied()
    }

    /// Reports the first structural problem recorded while building.
    pub fn validate(&self) -> Result<(), LpError> {
        match self.errors.first() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.offset + self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum::<f64>()
    }

    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].terms.iter().map(|(v, a)| a * x[v.0]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// One multiplier per row under the `c − Aᵀy` convention.
    pub duals: Vec<f64>,
    /// `c − Aᵀy` per variable.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.x[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Primal feasibility tolerance.
    pub feas_tol: f64,
    /// Reduced-cost tolerance.
    pub opt_tol: f64,
    /// Smallest acceptable pivot magnitude.
    pub pivot_tol: f64,
    /// Eta updates between refactorizations.
    pub refactor_every: usize,
    /// Bases up to this many rows use the dense factorization.
    pub dense_limit: usize,
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 100,
            dense_limit: 400,
            max_iterations: None,
        }
    }
}

/// Anything that can solve an [`LpProblem`] under the contract documented on
/// [`LpSolution`] may stand in for the bundled simplex.
pub trait LpSolver {
    fn solve(&self, problem: &LpProblem) -> Result<LpSolution, LpError>;
}

/// Solves with the bundled revised simplex.
pub fn solve_lp(problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution, LpError> {
    RevisedSimplex::new(*options).solve(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound_row_has_unit_dual() {
        let mut p = LpProblem::new("one");
        let x = p.add_nonneg_var("x", 1.0);
        let r = p.add_row("floor", RowKind::Ge, vec![(x, 1.0)], 3.0);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value(x), 3.0);
        assert_eq!(s.dual(r), 1.0);
        let k = check_kkt(&p, &s, 1e-12);
        assert_eq!(k.duality_gap, 0.0);
        assert!(k.passes());
    }

    #[test]
    fn free_variable_with_negative_cost_is_unbounded() {
        let mut p = LpProblem::new("unb");
        p.add_free_var("x", -1.0);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = LpProblem::new("inf");
        let x = p.add_nonneg_var("x", 1.0);
        p.add_row("lo", RowKind::Ge, vec![(x, 1.0)], 2.0);
        p.add_row("hi", RowKind::Ge, vec![(x, -1.0)], -1.0);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut p = LpProblem::new("dup");
        p.add_nonneg_var("x", 1.0);
        p.add_nonneg_var("x", 1.0);
        assert_eq!(p.validate(), Err(LpError::DuplicateVariable("x".into())));
    }

    #[test]
    fn small_transport_problem() {
        // two supplies, two demands; the cheap route saturates first
        let mut p = LpProblem::new("transport");
        let cost = [[1.0, 3.0], [2.0, 1.0]];
        let mut v = Vec::new();
        for (i, row) in cost.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                v.push(p.add_nonneg_var(format!("f{i}{j}"), *c));
            }
        }
        p.add_row("s0", RowKind::Ge, vec![(v[0], -1.0), (v[1], -1.0)], -5.0);
        p.add_row("s1", RowKind::Ge, vec![(v[2], -1.0), (v[3], -1.0)], -5.0);
        p.add_row("d0", RowKind::Eq, vec![(v[0], 1.0), (v[2], 1.0)], 6.0);
        p.add_row("d1", RowKind::Eq, vec![(v[1], 1.0), (v[3], 1.0)], 3.0);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // f00 = 5, f10 = 1, f11 = 3
        assert!((s.objective - 10.0).abs() < 1e-12);
        assert!(check_kkt(&p, &s, 1e-9).passes());
    }
}
