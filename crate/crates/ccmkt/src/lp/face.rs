//! Selection of a reproducible point on a degenerate optimal face.
//!
//! A simplex vertex is only one of possibly many optimal solutions, and which
//! one comes out depends on pivoting details. The routines here restrict the
//! problem to its optimal face and then optimize secondary objectives over
//! it, on the primal side and on the dual side.

use super::{LpError, LpProblem, LpSolution, LpSolver, LpStatus, RowId, RowKind, VarId};

/// Reduced costs and duals above this magnitude are treated as nonzero.
const FACE_TOL: f64 = 1e-8;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= FACE_TOL * (1.0 + b.abs())
}

/// Copy of `problem` restricted to the optimal face certified by `sol`:
/// variables with a nonzero reduced cost are fixed at their bound and rows
/// with a nonzero dual become equalities.
pub fn restrict_to_face(problem: &LpProblem, sol: &LpSolution) -> LpProblem {
    let mut out = problem.clone();
    for (j, v) in out.vars.iter_mut().enumerate() {
        let d = sol.reduced_costs[j];
        if d > FACE_TOL && v.lower.is_finite() {
            v.upper = v.lower;
        } else if d < -FACE_TOL && v.upper.is_finite() {
            v.lower = v.upper;
        }
    }
    for (i, r) in out.rows.iter_mut().enumerate() {
        if r.kind == RowKind::Ge && sol.duals[i] > FACE_TOL {
            r.kind = RowKind::Eq;
        }
    }
    out
}

/// Optimizes each objective in turn over the face left by the previous
/// ones. Returns the final primal point and the total iteration count.
pub fn refine_primal(
    problem: &LpProblem,
    first: &LpSolution,
    levels: &[Vec<(VarId, f64)>],
    solver: &dyn LpSolver,
) -> Result<(Vec<f64>, usize), LpError> {
    let mut face = restrict_to_face(problem, first);
    let mut x = first.x.clone();
    let mut iterations = 0;
    for level in levels {
        for v in face.vars.iter_mut() {
            v.cost = 0.0;
        }
        for &(var, c) in level {
            face.vars[var.0].cost += c;
        }
        face.offset = 0.0;
        let sol = solver.solve(&face)?;
        if sol.status != LpStatus::Optimal {
            return Err(LpError::Numerical(format!("face refinement ended {}", sol.status)));
        }
        iterations += sol.iterations;
        face = restrict_to_face(&face, &sol);
        x = sol.x;
    }
    Ok((x, iterations))
}

/// Among all dual vectors complementary to the optimal primal point `x`,
/// returns one maximizing `Σ weight·y` for each level in turn, or `None`
/// when the first maximum does not exist.
pub fn select_duals(
    problem: &LpProblem,
    x: &[f64],
    levels: &[Vec<(RowId, f64)>],
    solver: &dyn LpSolver,
) -> Result<Option<Vec<f64>>, LpError> {
    let mut dual = LpProblem::new(format!("{}_dual_face", problem.name));
    let mut slot = vec![None; problem.num_rows()];
    let mut columns: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); problem.num_vars()];
    for (i, r) in problem.rows().iter().enumerate() {
        let act: f64 = r.terms.iter().map(|(v, a)| a * x[v.0]).sum();
        let y = match r.kind {
            RowKind::Eq => dual.add_free_var(format!("y{i}"), 0.0),
            RowKind::Ge if near(act, r.rhs) => dual.add_nonneg_var(format!("y{i}"), 0.0),
            RowKind::Ge => continue,
        };
        slot[i] = Some(y);
        for &(v, a) in &r.terms {
            columns[v.0].push((y, a));
        }
    }
    let as_costs = |level: &Vec<(RowId, f64)>| -> Vec<(VarId, f64)> {
        level.iter().filter_map(|&(row, w)| slot[row.0].map(|y| (y, -w))).collect()
    };
    let Some((first, rest)) = levels.split_first() else {
        return Ok(None);
    };
    for (y, c) in as_costs(first) {
        dual.set_cost(y, dual.vars()[y.0].cost + c);
    }
    for (j, v) in problem.vars().iter().enumerate() {
        let at_lower = v.lower.is_finite() && near(x[j], v.lower);
        let at_upper = v.upper.is_finite() && near(x[j], v.upper);
        let col = std::mem::take(&mut columns[j]);
        match (at_lower, at_upper) {
            (true, true) => {}
            // Aᵀy ≤ c
            (true, false) => {
                let neg = col.into_iter().map(|(y, a)| (y, -a)).collect();
                dual.add_row(format!("d{j}"), RowKind::Ge, neg, -v.cost);
            }
            (false, true) => {
                dual.add_row(format!("d{j}"), RowKind::Ge, col, v.cost);
            }
            (false, false) => {
                dual.add_row(format!("d{j}"), RowKind::Eq, col, v.cost);
            }
        }
    }
    let sol = solver.solve(&dual)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let rest: Vec<Vec<(VarId, f64)>> = rest.iter().map(as_costs).collect();
    let (y, _) = refine_primal(&dual, &sol, &rest, solver)?;
    Ok(Some(slot.iter().map(|s| s.map_or(0.0, |v| y[v.0])).collect()))
}

/// Primal and dual solution assembled from a refined point and chosen duals,
/// with reduced costs recomputed against the original costs.
pub fn assemble(problem: &LpProblem, x: Vec<f64>, duals: Vec<f64>, iterations: usize) -> LpSolution {
    let mut reduced: Vec<f64> = problem.vars().iter().map(|v| v.cost).collect();
    for (i, r) in problem.rows().iter().enumerate() {
        for &(v, a) in &r.terms {
            reduced[v.0] -= a * duals[i];
        }
    }
    LpSolution {
        status: LpStatus::Optimal,
        objective: problem.objective(&x),
        x,
        duals,
        reduced_costs: reduced,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{check_kkt, RevisedSimplex, SolverOptions};

    // min x + y subject to x + y ≥ 2: every split of 2 is optimal
    fn flat() -> (LpProblem, VarId, VarId, RowId) {
        let mut p = LpProblem::new("flat");
        let x = p.add_nonneg_var("x", 1.0);
        let y = p.add_nonneg_var("y", 1.0);
        let r = p.add_row("sum", RowKind::Ge, vec![(x, 1.0), (y, 1.0)], 2.0);
        (p, x, y, r)
    }

    #[test]
    fn secondary_objective_picks_the_requested_end_of_the_face() {
        let (p, x, y, _) = flat();
        let s = RevisedSimplex::new(SolverOptions::default());
        let first = s.solve(&p).unwrap();
        for (level, want) in [(vec![(x, -1.0)], 2.0), (vec![(y, -1.0)], 0.0)] {
            let (pt, _) = refine_primal(&p, &first, &[level], &s).unwrap();
            assert!((pt[x.0] - want).abs() < 1e-12);
            assert!((pt[x.0] + pt[y.0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_selection_stays_complementary() {
        // two parallel floors on x; the dual weight can sit on either one
        let mut p = LpProblem::new("twin");
        let x = p.add_nonneg_var("x", 3.0);
        let a = p.add_row("a", RowKind::Ge, vec![(x, 1.0)], 1.0);
        let b = p.add_row("b", RowKind::Ge, vec![(x, 2.0)], 2.0);
        let s = RevisedSimplex::new(SolverOptions::default());
        let first = s.solve(&p).unwrap();
        let y = select_duals(&p, &first.x, &[vec![(a, 1.0)]], &s).unwrap().unwrap();
        assert!((y[a.0] - 3.0).abs() < 1e-12 && y[b.0].abs() < 1e-12);
        let y = select_duals(&p, &first.x, &[vec![(b, 1.0)]], &s).unwrap().unwrap();
        assert!((y[b.0] - 1.5).abs() < 1e-12 && y[a.0].abs() < 1e-12);
        let sol = assemble(&p, first.x.clone(), y, 0);
        assert!(check_kkt(&p, &sol, 1e-12).passes());
    }
}
