use crate::lp::{LpProblem, RowId, RowKind, VarId};
use crate::netmodel::MarketCase;

use super::{merge_terms, ClearingError};

#[derive(Debug, Clone)]
pub struct NominalIndex {
    pub dispatch: Vec<VarId>,
    pub reserve_up: Vec<VarId>,
    pub reserve_down: Vec<VarId>,
    pub vres_sched: Vec<VarId>,
    pub vres_spill: Vec<VarId>,
    pub sched_angle: Vec<VarId>,
    pub rt_angle: Vec<VarId>,
    pub curtail: Vec<VarId>,
    pub balance: Vec<RowId>,
    pub rebalance: Vec<RowId>,
}

#[derive(Debug, Clone)]
pub struct NominalModel {
    pub lp: LpProblem,
    pub index: NominalIndex,
}

impl NominalModel {
    /// Column and row counts implied by the model structure for `case`.
    pub fn expected_dims(case: &MarketCase) -> (usize, usize) {
        let (i, b, j, l) = (case.generators.len(), case.buses.len(), case.loads.len(), case.lines.len());
        (3 * i + 4 * b + j, 5 * i + 4 * b + j + 4 * l + 2)
    }
}

/// Two-stage clearing against a known renewable output per bus.
pub fn build_nominal(case: &MarketCase, realized: &[f64]) -> Result<NominalModel, ClearingError> {
    case.validate()?;
    let nb = case.buses.len();
    if realized.len() != nb || realized.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(crate::netmodel::CaseError::Invalid(vec![format!(
            "realized output needs {nb} finite nonnegative values, got {realized:?}"
        )])
        .into());
    }
    let g = &case.generators;
    let ld = &case.loads;
    let b = &case.buses;
    let gbus: Vec<usize> = (0..g.len()).map(|i| case.generator_bus(i)).collect();
    let lbus: Vec<usize> = (0..ld.len()).map(|j| case.load_bus(j)).collect();

    let mut lp = LpProblem::new("nominal");
    let dispatch: Vec<VarId> = g.iter().map(|x| lp.add_nonneg_var(format!("dispatch[{}]", x.id), x.cost)).collect();
    let reserve_up: Vec<VarId> = g.iter().map(|x| lp.add_nonneg_var(format!("reserve_up[{}]", x.id), x.up_cost)).collect();
    let reserve_down: Vec<VarId> =
        g.iter().map(|x| lp.add_nonneg_var(format!("reserve_down[{}]", x.id), -x.down_saving)).collect();
    let vres_sched: Vec<VarId> = b.iter().map(|id| lp.add_nonneg_var(format!("vres_sched[{id}]"), 0.0)).collect();
    let vres_spill: Vec<VarId> =
        (0..nb).map(|n| lp.add_nonneg_var(format!("vres_spill[{}]", b[n]), -case.vres_at(n).cost)).collect();
    let sched_angle: Vec<VarId> = b.iter().map(|id| lp.add_free_var(format!("sched_angle[{id}]"), 0.0)).collect();
    let rt_angle: Vec<VarId> = b.iter().map(|id| lp.add_free_var(format!("rt_angle[{id}]"), 0.0)).collect();
    let curtail: Vec<VarId> =
        ld.iter().map(|x| lp.add_nonneg_var(format!("curtail[{}]", x.id), x.curtailment_cost)).collect();
    lp.set_offset((0..nb).map(|n| case.vres_at(n).cost * realized[n]).sum());

    let lines: Vec<(usize, usize, f64, f64)> = (0..case.lines.len())
        .map(|k| {
            let (a, c) = case.line_ends(k);
            (a, c, case.lines[k].susceptance, case.lines[k].capacity)
        })
        .collect();

    let mut balance = Vec::with_capacity(nb);
    let mut rebalance = Vec::with_capacity(nb);
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
    for n in 0..nb {
        let mut t: Vec<(VarId, f64)> = Vec::new();
        for i in (0..g.len()).filter(|&i| gbus[i] == n) {
            t.push((reserve_up[i], 1.0));
            t.push((reserve_down[i], -1.0));
        }
        for j in (0..ld.len()).filter(|&j| lbus[j] == n) {
            t.push((curtail[j], 1.0));
        }
        t.push((vres_sched[n], -1.0));
        t.push((vres_spill[n], -1.0));
        for &(k, l, s, _) in &lines {
            if k == n || l == n {
                let other = if k == n { l } else { k };
                t.push((sched_angle[n], s));
                t.push((rt_angle[n], -s));
                t.push((sched_angle[other], -s));
                t.push((rt_angle[other], s));
            }
        }
        rebalance.push(lp.add_row(format!("rebalance[{}]", b[n]), RowKind::Eq, merge_terms(t), -realized[n]));
    }
    for (tag, angle) in [("line_sched", &sched_angle), ("line_rt", &rt_angle)] {
        for &(k, l, s, cap) in &lines {
            lp.add_row(format!("{tag}[{}->{}]", b[k], b[l]), RowKind::Ge, vec![(angle[k], -s), (angle[l], s)], -cap);
            lp.add_row(format!("{tag}[{}->{}]", b[l], b[k]), RowKind::Ge, vec![(angle[l], -s), (angle[k], s)], -cap);
        }
    }
    for n in 0..nb {
        lp.add_row(format!("vres_cap[{}]", b[n]), RowKind::Ge, vec![(vres_sched[n], -1.0)], -case.vres_at(n).schedule_cap);
        lp.add_row(format!("spill_ceiling[{}]", b[n]), RowKind::Ge, vec![(vres_spill[n], -1.0)], -realized[n]);
    }
    for i in 0..g.len() {
        let id = &g[i].id;
        lp.add_row(format!("gen_cap[{id}]"), RowKind::Ge, vec![(dispatch[i], -1.0)], -g[i].capacity);
        lp.add_row(format!("up_ceiling[{id}]"), RowKind::Ge, vec![(reserve_up[i], -1.0)], -g[i].up_reserve_cap);
        lp.add_row(format!("down_ceiling[{id}]"), RowKind::Ge, vec![(reserve_down[i], -1.0)], -g[i].down_reserve_cap);
        lp.add_row(
            format!("output_floor[{id}]"),
            RowKind::Ge,
            vec![(dispatch[i], 1.0), (reserve_up[i], 1.0), (reserve_down[i], -1.0)],
            0.0,
        );
        lp.add_row(
            format!("output_ceiling[{id}]"),
            RowKind::Ge,
            vec![(dispatch[i], -1.0), (reserve_up[i], -1.0), (reserve_down[i], 1.0)],
            -g[i].capacity,
        );
    }
    for j in 0..ld.len() {
        lp.add_row(format!("curtail_ceiling[{}]", ld[j].id), RowKind::Ge, vec![(curtail[j], -1.0)], -ld[j].demand);
    }
    let r = case.reference_index();
    lp.add_row("ref_sched_angle", RowKind::Eq, vec![(sched_angle[r], 1.0)], 0.0);
    lp.add_row("ref_rt_angle", RowKind::Eq, vec![(rt_angle[r], 1.0)], 0.0);

    Ok(NominalModel {
        lp,
        index: NominalIndex {
            dispatch,
            reserve_up,
            reserve_down,
            vres_sched,
            vres_spill,
            sched_angle,
            rt_angle,
            curtail,
            balance,
            rebalance,
        },
    })
}
