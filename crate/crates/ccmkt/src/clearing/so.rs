use crate::lp::{LpProblem, LpSolution, LpSolver, LpStatus, RevisedSimplex, RowId, RowKind, SolverOptions, VarId};
use crate::netmodel::MarketCase;

use super::{merge_terms, ClearingError, ScenarioSet};

/// Column and row handles of the scenario-based clearing LP. Second-stage
/// handles are indexed `[scenario][element]`.
#[derive(Debug, Clone)]
pub struct SoIndex {
    pub dispatch: Vec<VarId>,
    pub vres_sched: Vec<VarId>,
    pub sched_angle: Vec<VarId>,
    pub reserve_up: Vec<Vec<VarId>>,
    pub reserve_down: Vec<Vec<VarId>>,
    pub vres_spill: Vec<Vec<VarId>>,
    pub rt_angle: Vec<Vec<VarId>>,
    pub curtail: Vec<Vec<VarId>>,
    pub balance: Vec<RowId>,
    pub rebalance: Vec<Vec<RowId>>,
}

#[derive(Debug, Clone)]
pub struct SoModel {
    pub lp: LpProblem,
    pub index: SoIndex,
}

impl SoModel {
    /// Column count implied by the model structure.
    pub fn expected_columns(case: &MarketCase, scenarios: usize) -> usize {
        let (i, b, j) = (case.generators.len(), case.buses.len(), case.loads.len());
        i + 2 * b + scenarios * (2 * i + 2 * b + j)
    }
}

/// Builds the expected-cost clearing over `scenarios`. Simple caps on single
/// variables are carried as column bounds rather than rows.
pub fn build_so(case: &MarketCase, scenarios: &ScenarioSet) -> Result<SoModel, ClearingError> {
    case.validate()?;
    let nb = case.buses.len();
    let bad = scenarios.is_empty()
        || scenarios.output.iter().any(|row| row.len() != nb || row.iter().any(|w| !w.is_finite() || *w < 0.0))
        || scenarios.probability.iter().any(|p| !(*p > 0.0))
        || (scenarios.probability.iter().sum::<f64>() - 1.0).abs() > 1e-9;
    if bad {
        return Err(crate::netmodel::CaseError::Invalid(vec![
            "scenario set must be nonempty with positive probabilities summing to one and one nonnegative value per bus"
                .into(),
        ])
        .into());
    }
    let g = &case.generators;
    let ld = &case.loads;
    let b = &case.buses;
    let gbus: Vec<usize> = (0..g.len()).map(|i| case.generator_bus(i)).collect();
    let lbus: Vec<usize> = (0..ld.len()).map(|j| case.load_bus(j)).collect();
    let lines: Vec<(usize, usize, f64, f64)> = (0..case.lines.len())
        .map(|k| {
            let (a, c) = case.line_ends(k);
            (a, c, case.lines[k].susceptance, case.lines[k].capacity)
        })
        .collect();

    let mut lp = LpProblem::new("so");
    let dispatch: Vec<VarId> =
        g.iter().map(|x| lp.add_var(format!("dispatch[{}]", x.id), 0.0, x.capacity, x.cost)).collect();
    let vres_sched: Vec<VarId> =
        (0..nb).map(|n| lp.add_var(format!("vres_sched[{}]", b[n]), 0.0, case.vres_at(n).schedule_cap, 0.0)).collect();
    let sched_angle: Vec<VarId> = b.iter().map(|id| lp.add_free_var(format!("sched_angle[{id}]"), 0.0)).collect();

    let mut reserve_up = Vec::with_capacity(scenarios.len());
    let mut reserve_down = Vec::with_capacity(scenarios.len());
    let mut vres_spill = Vec::with_capacity(scenarios.len());
    let mut rt_angle = Vec::with_capacity(scenarios.len());
    let mut curtail = Vec::with_capacity(scenarios.len());
    let mut offset = 0.0;
    for (w, (&pi, out)) in scenarios.probability.iter().zip(&scenarios.output).enumerate() {
        let mut ru = Vec::with_capacity(g.len());
        let mut rd = Vec::with_capacity(g.len());
        for x in g {
            ru.push(lp.add_var(format!("reserve_up[{},{w}]", x.id), 0.0, x.up_reserve_cap, pi * x.up_cost));
            rd.push(lp.add_var(format!("reserve_down[{},{w}]", x.id), 0.0, x.down_reserve_cap, -pi * x.down_saving));
        }
        let mut sp = Vec::with_capacity(nb);
        let mut ang = Vec::with_capacity(nb);
        for n in 0..nb {
            let cost = case.vres_at(n).cost;
            offset += pi * cost * out[n];
            sp.push(lp.add_var(format!("vres_spill[{},{w}]", b[n]), 0.0, out[n], -pi * cost));
            ang.push(lp.add_free_var(format!("rt_angle[{},{w}]", b[n]), 0.0));
        }
        let cu: Vec<VarId> = ld
            .iter()
            .map(|x| lp.add_var(format!("curtail[{},{w}]", x.id), 0.0, x.demand, pi * x.curtailment_cost))
            .collect();
        reserve_up.push(ru);
        reserve_down.push(rd);
        vres_spill.push(sp);
        rt_angle.push(ang);
        curtail.push(cu);
    }
    lp.set_offset(offset);

    let mut balance = Vec::with_capacity(nb);
    for n in 0..nb {
        let mut t: Vec<(VarId, f64)> = (0..g.len()).filter(|&i| gbus[i] == n).map(|i| (dispatch[i], 1.0)).collect();
        t.push((vres_sched[n], 1.0));
        for &(k, l, s, _) in &lines {
            if k == n || l == n {
                let other = if k == n { l } else { k };
                t.push((sched_angle[n], -s));
                t.push((sched_angle[other], s));
            }
        }
        let demand: f64 = (0..ld.len()).filter(|&j| lbus[j] == n).map(|j| ld[j].demand).sum();
        balance.push(lp.add_row(format!("balance[{}]", b[n]), RowKind::Eq, merge_terms(t), demand));
    }
    let mut rebalance = Vec::with_capacity(scenarios.len());
    for (w, out) in scenarios.output.iter().enumerate() {
        let mut rows = Vec::with_capacity(nb);
        for n in 0..nb {
            let mut t: Vec<(VarId, f64)> = Vec::new();
            for i in (0..g.len()).filter(|&i| gbus[i] == n) {
                t.push((reserve_up[w][i], 1.0));
                t.push((reserve_down[w][i], -1.0));
            }
            for j in (0..ld.len()).filter(|&j| lbus[j] == n) {
                t.push((curtail[w][j], 1.0));
            }
            t.push((vres_sched[n], -1.0));
            t.push((vres_spill[w][n], -1.0));
            for &(k, l, s, _) in &lines {
                if k == n || l == n {
                    let other = if k == n { l } else { k };
                    t.push((sched_angle[n], s));
                    t.push((rt_angle[w][n], -s));
                    t.push((sched_angle[other], -s));
                    t.push((rt_angle[w][other], s));
                }
            }
            rows.push(lp.add_row(format!("rebalance[{},{w}]", b[n]), RowKind::Eq, merge_terms(t), -out[n]));
        }
        rebalance.push(rows);
    }
    for &(k, l, s, cap) in &lines {
        for (a, c) in [(k, l), (l, k)] {
            lp.add_row(
                format!("line_sched[{}->{}]", b[a], b[c]),
                RowKind::Ge,
                vec![(sched_angle[a], -s), (sched_angle[c], s)],
                -cap,
            );
        }
    }
    for w in 0..scenarios.len() {
        for &(k, l, s, cap) in &lines {
            for (a, c) in [(k, l), (l, k)] {
                lp.add_row(
                    format!("line_rt[{}->{},{w}]", b[a], b[c]),
                    RowKind::Ge,
                    vec![(rt_angle[w][a], -s), (rt_angle[w][c], s)],
                    -cap,
                );
            }
        }
        for i in 0..g.len() {
            let t = [(dispatch[i], 1.0), (reserve_up[w][i], 1.0), (reserve_down[w][i], -1.0)];
            lp.add_row(format!("output_floor[{},{w}]", g[i].id), RowKind::Ge, t.to_vec(), 0.0);
            lp.add_row(
                format!("output_ceiling[{},{w}]", g[i].id),
                RowKind::Ge,
                t.iter().map(|&(v, a)| (v, -a)).collect(),
                -g[i].capacity,
            );
        }
    }
    let r = case.reference_index();
    lp.add_row("ref_sched_angle", RowKind::Eq, vec![(sched_angle[r], 1.0)], 0.0);
    for w in 0..scenarios.len() {
        lp.add_row(format!("ref_rt_angle[{w}]"), RowKind::Eq, vec![(rt_angle[w][r], 1.0)], 0.0);
    }

    Ok(SoModel {
        lp,
        index: SoIndex {
            dispatch,
            vres_sched,
            sched_angle,
            reserve_up,
            reserve_down,
            vres_spill,
            rt_angle,
            curtail,
            balance,
            rebalance,
        },
    })
}

/// Optimal scenario-based clearing. Second-stage values are `[scenario][element]`.
#[derive(Debug, Clone)]
pub struct SoSolution {
    pub case: MarketCase,
    pub scenarios: ScenarioSet,
    pub lp: LpSolution,
    pub objective: f64,
    pub dispatch: Vec<f64>,
    pub vres_sched: Vec<f64>,
    pub sched_angle: Vec<f64>,
    pub reserve_up: Vec<Vec<f64>>,
    pub reserve_down: Vec<Vec<f64>>,
    pub vres_spill: Vec<Vec<f64>>,
    pub rt_angle: Vec<Vec<f64>>,
    pub curtail: Vec<Vec<f64>>,
    pub balance_dual: Vec<f64>,
    /// Probability-weighted rebalance multiplier per scenario and bus.
    pub rebalance_dual: Vec<Vec<f64>>,
    /// Largest rebalance-row residual over all scenarios and buses.
    pub max_rebalance_residual: f64,
}

pub fn solve_so(case: &MarketCase, scenarios: &ScenarioSet) -> Result<SoSolution, ClearingError> {
    solve_so_with(case, scenarios, &RevisedSimplex::new(SolverOptions::default()))
}

pub fn solve_so_with(
    case: &MarketCase,
    scenarios: &ScenarioSet,
    solver: &dyn LpSolver,
) -> Result<SoSolution, ClearingError> {
    let model = build_so(case, scenarios)?;
    let lp = solver.solve(&model.lp)?;
    match lp.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(ClearingError::Infeasible("scenario-based clearing".into())),
        LpStatus::Unbounded => return Err(ClearingError::Unbounded("scenario-based clearing".into())),
    }
    let ix = &model.index;
    let vals = |v: &[VarId]| v.iter().map(|&x| lp.value(x)).collect::<Vec<f64>>();
    let per = |v: &[Vec<VarId>]| v.iter().map(|row| vals(row)).collect::<Vec<_>>();
    let mut residual: f64 = 0.0;
    for row in ix.rebalance.iter().flatten() {
        let r = &model.lp.rows()[row.0];
        residual = residual.max((model.lp.row_activity(*row, &lp.x) - r.rhs).abs());
    }
    Ok(SoSolution {
        objective: lp.objective,
        dispatch: vals(&ix.dispatch),
        vres_sched: vals(&ix.vres_sched),
        sched_angle: vals(&ix.sched_angle),
        reserve_up: per(&ix.reserve_up),
        reserve_down: per(&ix.reserve_down),
        vres_spill: per(&ix.vres_spill),
        rt_angle: per(&ix.rt_angle),
        curtail: per(&ix.curtail),
        balance_dual: ix.balance.iter().map(|&r| lp.dual(r)).collect(),
        rebalance_dual: ix.rebalance.iter().map(|rows| rows.iter().map(|&r| lp.dual(r)).collect()).collect(),
        max_rebalance_residual: residual,
        case: case.clone(),
        scenarios: scenarios.clone(),
        lp,
    })
}
