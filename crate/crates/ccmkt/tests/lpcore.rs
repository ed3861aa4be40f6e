mod common;

use ccmkt::clearing::{build_dcco, solve_cco};
use ccmkt::lp::{check_kkt, solve_lp, write_lp_format, LpProblem, LpStatus, RowId, RowKind, SolverOptions};
use common::case;
use proptest::prelude::*;

/// Dense description of a small LP with box bounds `[0, upper]`.
#[derive(Debug, Clone)]
struct SmallLp {
    cost: Vec<f64>,
    upper: f64,
    rows: Vec<(Vec<f64>, RowKind, f64)>,
}

impl SmallLp {
    fn problem(&self) -> LpProblem {
        let mut p = LpProblem::new("small");
        let x: Vec<_> = self.cost.iter().enumerate().map(|(j, c)| p.add_var(format!("x{j}"), 0.0, self.upper, *c)).collect();
        for (i, (a, kind, b)) in self.rows.iter().enumerate() {
            let terms = a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (x[j], *v)).collect();
            p.add_row(format!("r{i}"), *kind, terms, *b);
        }
        p
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Minimum over all basic feasible points, or `None` when no vertex is feasible.
fn vertex_oracle(lp: &SmallLp) -> Option<f64> {
    let n = lp.cost.len();
    // every constraint as a·x (≥ or =) b, bounds included
    let mut cons: Vec<(Vec<f64>, bool, f64)> = lp.rows.iter().map(|(a, k, b)| (a.clone(), *k == RowKind::Eq, *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), false, 0.0));
        e[j] = -1.0;
        cons.push((e, false, -lp.upper));
    }
    let feasible = |x: &[f64]| {
        cons.iter().all(|(a, eq, b)| {
            let act: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
            if *eq { (act - b).abs() <= 1e-9 } else { act >= b - 1e-9 }
        })
    };
    let m = cons.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let chosen: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let a = chosen.iter().map(|&k| cons[k].0.clone()).collect();
        let b = chosen.iter().map(|&k| cons[k].2).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let obj: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
    }
    best
}

fn small_lp() -> impl Strategy<Value = SmallLp> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        let coef = -5i32..=5;
        let row = (prop::collection::vec(coef.clone(), n), prop::bool::weighted(0.25), -10i32..=10);
        (prop::collection::vec(coef, n), prop::collection::vec(row, m)).prop_map(|(c, rows)| SmallLp {
            cost: c.into_iter().map(f64::from).collect(),
            upper: 10.0,
            rows: rows
                .into_iter()
                .map(|(a, eq, b)| {
                    (a.into_iter().map(f64::from).collect(), if eq { RowKind::Eq } else { RowKind::Ge }, f64::from(b))
                })
                .collect(),
        })
    })
}

fn resolve_with_rhs(p: &LpProblem, row: RowId, rhs: f64) -> Option<f64> {
    let mut q = p.clone();
    q.set_rhs(row, rhs);
    let s = solve_lp(&q, &SolverOptions::default()).unwrap();
    (s.status == LpStatus::Optimal).then_some(s.objective)
}

/// Checks each row dual against one-sided finite differences of the optimal
/// value. Where both sides agree the optimal dual is unique and must match;
/// otherwise it must lie between them. Returns the number of rows where the
/// two sides agreed.
fn check_duals_by_differences(p: &LpProblem, duals: &[f64], objective: f64, tol: f64) -> usize {
    const STEP: f64 = 1e-5;
    let mut unique = 0;
    for (i, row) in p.rows().iter().enumerate() {
        let (Some(up), Some(down)) =
            (resolve_with_rhs(p, RowId(i), row.rhs + STEP), resolve_with_rhs(p, RowId(i), row.rhs - STEP))
        else {
            continue;
        };
        let right = (up - objective) / STEP;
        let left = (objective - down) / STEP;
        if (right - left).abs() <= tol {
            unique += 1;
            assert!((duals[i] - right).abs() <= tol, "row {}: dual {} vs slope {right}", row.name, duals[i]);
        } else {
            assert!(duals[i] >= left - tol && duals[i] <= right + tol, "row {}: dual {} outside [{left}, {right}]", row.name, duals[i]);
        }
    }
    unique
}

#[test]
fn case_one_cost_matches_offline_solver() {
    // optimal value from an external LP solver run on the exported model
    let model = build_dcco(&case("case1")).unwrap();
    let s = solve_lp(&model.lp, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    common::assert_close(s.objective, 3447.080872, 5e-7);
    let text = write_lp_format(&model.lp);
    assert!(text.starts_with("\\ dcco\nMinimize"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn case_one_objectives_of_all_variants() {
    for (name, expected) in [("case1", 3447.080872), ("case2", 3658.909350), ("case3", 3500.003697), ("case4", 3699.409350)] {
        let sol = solve_cco(&case(name)).unwrap();
        common::assert_close(sol.objective, expected, 5e-7);
    }
}

#[test]
fn case_one_solution_passes_kkt() {
    let sol = solve_cco(&case("case1")).unwrap();
    let k = check_kkt(&sol.model.lp, &sol.lp, 1e-7);
    assert!(k.passes(), "{k:?}");
}

#[test]
fn perturbed_primal_fails_kkt() {
    let sol = solve_cco(&case("case1")).unwrap();
    let p = &sol.model.lp;
    // balance row at bus 1 has unit coefficient on the dispatch of G1
    let g1 = sol.model.index.dispatch[0];
    let mut bad = sol.lp.clone();
    bad.x[g1.0] += 1.0;
    let k = check_kkt(p, &bad, 1e-7);
    assert!(!k.passes());
    let coef = p.rows().iter().flat_map(|r| r.terms.iter()).filter(|(v, _)| *v == g1).map(|(_, a)| a.abs()).fold(0.0, f64::max);
    assert!(k.primal_residual >= 1.0 - 1e-9 && k.primal_residual <= coef + 1e-9, "{k:?}");
}

#[test]
fn case_one_duals_match_finite_differences() {
    let sol = solve_cco(&case("case1")).unwrap();
    let unique = check_duals_by_differences(&sol.model.lp, &sol.lp.duals, sol.lp.objective, 1e-4);
    assert!(unique > 0);
}

#[test]
fn resolving_is_bit_identical() {
    let model = build_dcco(&case("case2")).unwrap();
    let a = solve_lp(&model.lp, &SolverOptions::default()).unwrap();
    let b = solve_lp(&model.lp, &SolverOptions::default()).unwrap();
    assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(
        a.duals.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.duals.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    let (s, t) = (solve_cco(&case("case3")).unwrap(), solve_cco(&case("case3")).unwrap());
    assert_eq!(s.lp.duals, t.lp.duals);
    assert_eq!(s.lp.x, t.lp.x);
}

#[test]
fn sparse_factorization_agrees_with_dense() {
    let model = build_dcco(&case("case1")).unwrap();
    let opts = SolverOptions { refactor_every: 5, dense_limit: 0, ..SolverOptions::default() };
    let s = solve_lp(&model.lp, &opts).unwrap();
    common::assert_close(s.objective, 3447.080872, 5e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vertex_enumeration(lp in small_lp()) {
        let p = lp.problem();
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(s.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(s.status, LpStatus::Optimal);
                prop_assert!((s.objective - best).abs() <= 1e-8 * (1.0 + best.abs()), "{} vs {}", s.objective, best);
                prop_assert!(check_kkt(&p, &s, 1e-8).passes());
            }
        }
    }

    #[test]
    fn duals_are_sensitivities(lp in small_lp()) {
        let p = lp.problem();
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        prop_assume!(s.status == LpStatus::Optimal);
        check_duals_by_differences(&p, &s.duals, s.objective, 1e-4);
        for (row, y) in p.rows().iter().zip(&s.duals) {
            if row.kind == RowKind::Ge {
                prop_assert!(*y >= -1e-9);
            }
        }
    }

    #[test]
    fn solving_twice_is_deterministic(lp in small_lp()) {
        let p = lp.problem();
        let a = solve_lp(&p, &SolverOptions::default()).unwrap();
        let b = solve_lp(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.duals, b.duals);
    }
}
