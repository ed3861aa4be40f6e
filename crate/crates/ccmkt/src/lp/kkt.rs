use super::{LpProblem, LpSolution, RowKind};

/// Residuals of the optimality conditions at a candidate primal/dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    pub tol: f64,
}

impl KktReport {
    pub fn passes(&self) -> bool {
        self.primal_residual <= self.tol
            && self.dual_residual <= self.tol
            && self.complementarity <= self.tol
            && self.duality_gap <= self.tol
    }

    pub fn worst(&self) -> f64 {
        self.primal_residual
            .max(self.dual_residual)
            .max(self.complementarity)
            .max(self.duality_gap)
    }
}

/// Checks primal feasibility, dual feasibility, complementary slackness and
/// the relative duality gap. Reduced costs are recomputed from the duals
/// rather than trusted from the solution.
pub fn check_kkt(problem: &LpProblem, solution: &LpSolution, tol: f64) -> KktReport {
    let x = &solution.x;
    let y = &solution.duals;
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut reduced: Vec<f64> = problem.vars().iter().map(|v| v.cost).collect();
    let mut dual_obj = problem.offset();

    for (i, row) in problem.rows().iter().enumerate() {
        let act: f64 = row.terms.iter().map(|(v, a)| a * x[v.0]).sum();
        for (v, a) in &row.terms {
            reduced[v.0] -= a * y[i];
        }
        dual_obj += row.rhs * y[i];
        match row.kind {
            RowKind::Eq => primal = primal.max((act - row.rhs).abs()),
            RowKind::Ge => {
                primal = primal.max(row.rhs - act);
                dual = dual.max(-y[i]);
                comp = comp.max((y[i] * (act - row.rhs)).abs());
            }
        }
    }
    for (j, v) in problem.vars().iter().enumerate() {
        let d = reduced[j];
        primal = primal.max(v.lower - x[j]).max(x[j] - v.upper);
        // split d into multipliers of the lower and upper bound
        let (dl, du) = (d.max(0.0), (-d).max(0.0));
        if v.lower.is_finite() {
            dual_obj += v.lower * dl;
            comp = comp.max((dl * (x[j] - v.lower)).abs());
        } else {
            dual = dual.max(dl);
        }
        if v.upper.is_finite() {
            dual_obj -= v.upper * du;
            comp = comp.max((du * (v.upper - x[j])).abs());
        } else {
            dual = dual.max(du);
        }
    }
    let primal_obj = problem.objective(x);
    let gap = (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs());
    KktReport {
        primal_residual: primal.max(0.0),
        dual_residual: dual.max(0.0),
        complementarity: comp,
        duality_gap: gap,
        tol,
    }
}
