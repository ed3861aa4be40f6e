use crate::lp::{face, LpProblem, LpSolution, LpSolver, LpStatus, RevisedSimplex, RowId, RowKind, SolverOptions, VarId};
use crate::netmodel::MarketCase;

use super::quantile::bus_quantiles;
use super::{merge_terms, ClearingError, ASSUMPTION_TOL};

/// Column and row handles of the deterministic-equivalent chance-constrained LP.
#[derive(Debug, Clone)]
pub struct DccoIndex {
    pub dispatch: Vec<VarId>,
    pub reserve_up: Vec<VarId>,
    pub reserve_down: Vec<VarId>,
    pub up_share: Vec<VarId>,
    pub down_share: Vec<VarId>,
    pub vres_sched: Vec<VarId>,
    pub vres_spill: Vec<VarId>,
    pub spill_share: Vec<VarId>,
    pub sched_angle: Vec<VarId>,
    pub rt_angle: Vec<VarId>,
    pub curtail: Vec<VarId>,
    pub curtail_share: Vec<VarId>,

    pub balance: Vec<RowId>,
    pub rebalance: Vec<RowId>,
    /// Control-budget row per bus; absent where the bus carries no uncertainty.
    pub control: Vec<Option<RowId>>,
    /// Scheduling-stage flow limits, one pair (forward, backward) per line.
    pub line_sched: Vec<[RowId; 2]>,
    pub line_rt: Vec<[RowId; 2]>,
    pub vres_cap: Vec<RowId>,
    pub gen_cap: Vec<RowId>,
    pub spill_floor: Vec<RowId>,
    pub spill_ceiling: Vec<RowId>,
    pub up_floor: Vec<RowId>,
    pub up_ceiling: Vec<RowId>,
    pub down_floor: Vec<RowId>,
    pub down_ceiling: Vec<RowId>,
    pub output_floor: Vec<RowId>,
    pub output_ceiling: Vec<RowId>,
    pub curtail_floor: Vec<RowId>,
    pub curtail_ceiling: Vec<RowId>,
    pub ref_sched_angle: RowId,
    pub ref_rt_angle: RowId,
}

#[derive(Debug, Clone)]
pub struct DccoModel {
    pub lp: LpProblem,
    pub index: DccoIndex,
    /// Standardized upper quantile per bus.
    pub bus_quantile: Vec<f64>,
    /// Quantile-scaled error spread seen by each generator.
    pub gen_spread: Vec<f64>,
    pub load_spread: Vec<f64>,
}

/// Row counts of the emitted model next to the closed-form count quoted for
/// the model in the literature; the two differ and are reported, not asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowCount {
    pub emitted: usize,
    pub quoted_formula: usize,
}

impl DccoModel {
    pub fn row_count(&self, case: &MarketCase) -> RowCount {
        let (i, b, j, l) = (case.generators.len(), case.buses.len(), case.loads.len(), case.lines.len() * 2);
        RowCount { emitted: self.lp.num_rows(), quoted_formula: 6 * i + 5 * b + 2 * j + 2 * l }
    }
}

pub fn build_dcco(case: &MarketCase) -> Result<DccoModel, ClearingError> {
    case.validate()?;
    let q = bus_quantiles(case)?;
    let nb = case.buses.len();
    let ng = case.generators.len();
    let nl = case.loads.len();
    let sigma: Vec<f64> = (0..nb).map(|n| case.vres_at(n).sigma).collect();
    let spread: Vec<f64> = (0..nb).map(|n| q[n] * sigma[n]).collect();
    let gbus: Vec<usize> = (0..ng).map(|i| case.generator_bus(i)).collect();
    let lbus: Vec<usize> = (0..nl).map(|j| case.load_bus(j)).collect();
    let gen_spread: Vec<f64> = gbus.iter().map(|&n| spread[n]).collect();
    let load_spread: Vec<f64> = lbus.iter().map(|&n| spread[n]).collect();
    let uncertain = |n: usize| sigma[n] > 0.0;

    let mut lp = LpProblem::new("dcco");
    let g = &case.generators;
    let dispatch: Vec<VarId> = g.iter().map(|x| lp.add_nonneg_var(format!("dispatch[{}]", x.id), x.cost)).collect();
    let reserve_up: Vec<VarId> = g.iter().map(|x| lp.add_nonneg_var(format!("reserve_up[{}]", x.id), x.up_cost)).collect();
    let reserve_down: Vec<VarId> =
        g.iter().map(|x| lp.add_nonneg_var(format!("reserve_down[{}]", x.id), -x.down_saving)).collect();
    let share = |lp: &mut LpProblem, name: String, free: bool| {
        if free {
            lp.add_nonneg_var(name, 0.0)
        } else {
            lp.add_var(name, 0.0, 0.0, 0.0)
        }
    };
    let up_share: Vec<VarId> =
        (0..ng).map(|i| share(&mut lp, format!("up_share[{}]", g[i].id), uncertain(gbus[i]))).collect();
    let down_share: Vec<VarId> =
        (0..ng).map(|i| share(&mut lp, format!("down_share[{}]", g[i].id), uncertain(gbus[i]))).collect();
    let b = &case.buses;
    let vres_sched: Vec<VarId> = b.iter().map(|id| lp.add_nonneg_var(format!("vres_sched[{id}]"), 0.0)).collect();
    let vres_spill: Vec<VarId> =
        (0..nb).map(|n| lp.add_nonneg_var(format!("vres_spill[{}]", b[n]), -case.vres_at(n).cost)).collect();
    let spill_share: Vec<VarId> =
        (0..nb).map(|n| share(&mut lp, format!("spill_share[{}]", b[n]), uncertain(n))).collect();
    let sched_angle: Vec<VarId> = b.iter().map(|id| lp.add_free_var(format!("sched_angle[{id}]"), 0.0)).collect();
    let rt_angle: Vec<VarId> = b.iter().map(|id| lp.add_free_var(format!("rt_angle[{id}]"), 0.0)).collect();
    let ld = &case.loads;
    let curtail: Vec<VarId> =
        ld.iter().map(|x| lp.add_nonneg_var(format!("curtail[{}]", x.id), x.curtailment_cost)).collect();
    let curtail_share: Vec<VarId> =
        (0..nl).map(|j| share(&mut lp, format!("curtail_share[{}]", ld[j].id), uncertain(lbus[j]))).collect();
    lp.set_offset((0..nb).map(|n| case.vres_at(n).cost * case.vres_at(n).forecast).sum());

    let lines: Vec<(usize, usize, f64, f64)> = (0..case.lines.len())
        .map(|k| {
            let (a, c) = case.line_ends(k);
            (a, c, case.lines[k].susceptance, case.lines[k].capacity)
        })
        .collect();

    let mut balance = Vec::with_capacity(nb);
    for n in 0..nb {
        let mut t: Vec<(VarId, f64)> = Vec::new();
        for i in (0..ng).filter(|&i| gbus[i] == n) {
            t.push((dispatch[i], 1.0));
        }
        t.push((vres_sched[n], 1.0));
        for &(k, l, s, _) in &lines {
            if k == n || l == n {
                let other = if k == n { l } else { k };
                t.push((sched_angle[n], -s));
                t.push((sched_angle[other], s));
            }
        }
        let demand: f64 = (0..nl).filter(|&j| lbus[j] == n).map(|j| ld[j].demand).sum();
        balance.push(lp.add_row(format!("balance[{}]", b[n]), RowKind::Eq, merge_terms(t), demand));
    }
    let mut rebalance = Vec::with_capacity(nb);
    for n in 0..nb {
        let mut t: Vec<(VarId, f64)> = Vec::new();
        for i in (0..ng).filter(|&i| gbus[i] == n) {
            t.push((reserve_up[i], 1.0));
            t.push((reserve_down[i], -1.0));
        }
        for j in (0..nl).filter(|&j| lbus[j] == n) {
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
        let rhs = -case.vres_at(n).forecast;
        rebalance.push(lp.add_row(format!("rebalance[{}]", b[n]), RowKind::Eq, merge_terms(t), rhs));
    }
    let mut control = Vec::with_capacity(nb);
    for n in 0..nb {
        if !uncertain(n) {
            control.push(None);
            continue;
        }
        let mut t: Vec<(VarId, f64)> = Vec::new();
        for i in (0..ng).filter(|&i| gbus[i] == n) {
            t.push((up_share[i], 1.0));
            t.push((down_share[i], 1.0));
        }
        for j in (0..nl).filter(|&j| lbus[j] == n) {
            t.push((curtail_share[j], 1.0));
        }
        t.push((spill_share[n], 1.0));
        control.push(Some(lp.add_row(format!("control[{}]", b[n]), RowKind::Eq, t, 1.0)));
    }
    let flow_rows = |lp: &mut LpProblem, tag: &str, angle: &[VarId]| -> Vec<[RowId; 2]> {
        lines
            .iter()
            .map(|&(k, l, s, cap)| {
                let fwd = lp.add_row(
                    format!("{tag}[{}->{}]", b[k], b[l]),
                    RowKind::Ge,
                    vec![(angle[k], -s), (angle[l], s)],
                    -cap,
                );
                let bwd = lp.add_row(
                    format!("{tag}[{}->{}]", b[l], b[k]),
                    RowKind::Ge,
                    vec![(angle[l], -s), (angle[k], s)],
                    -cap,
                );
                [fwd, bwd]
            })
            .collect()
    };
    let line_sched = flow_rows(&mut lp, "line_sched", &sched_angle);
    let line_rt = flow_rows(&mut lp, "line_rt", &rt_angle);
    let vres_cap: Vec<RowId> = (0..nb)
        .map(|n| {
            lp.add_row(format!("vres_cap[{}]", b[n]), RowKind::Ge, vec![(vres_sched[n], -1.0)], -case.vres_at(n).schedule_cap)
        })
        .collect();
    let gen_cap: Vec<RowId> = (0..ng)
        .map(|i| lp.add_row(format!("gen_cap[{}]", g[i].id), RowKind::Ge, vec![(dispatch[i], -1.0)], -g[i].capacity))
        .collect();
    let mut spill_floor = Vec::with_capacity(nb);
    let mut spill_ceiling = Vec::with_capacity(nb);
    for n in 0..nb {
        let sp = spread[n];
        spill_floor.push(lp.add_row(
            format!("spill_floor[{}]", b[n]),
            RowKind::Ge,
            vec![(vres_spill[n], 1.0), (spill_share[n], -sp)],
            0.0,
        ));
        // −w − (1 − β)·spread ≥ −W  ⇔  −w + β·spread ≥ −W + spread
        spill_ceiling.push(lp.add_row(
            format!("spill_ceiling[{}]", b[n]),
            RowKind::Ge,
            vec![(vres_spill[n], -1.0), (spill_share[n], sp)],
            -case.vres_at(n).forecast + sp,
        ));
    }
    let mut up_floor = Vec::with_capacity(ng);
    let mut up_ceiling = Vec::with_capacity(ng);
    let mut down_floor = Vec::with_capacity(ng);
    let mut down_ceiling = Vec::with_capacity(ng);
    let mut output_floor = Vec::with_capacity(ng);
    let mut output_ceiling = Vec::with_capacity(ng);
    for i in 0..ng {
        let sp = gen_spread[i];
        let id = &g[i].id;
        up_floor.push(lp.add_row(format!("up_floor[{id}]"), RowKind::Ge, vec![(reserve_up[i], 1.0), (up_share[i], -sp)], 0.0));
        up_ceiling.push(lp.add_row(
            format!("up_ceiling[{id}]"),
            RowKind::Ge,
            vec![(reserve_up[i], -1.0), (up_share[i], -sp)],
            -g[i].up_reserve_cap,
        ));
        down_floor.push(lp.add_row(
            format!("down_floor[{id}]"),
            RowKind::Ge,
            vec![(reserve_down[i], 1.0), (down_share[i], -sp)],
            0.0,
        ));
        down_ceiling.push(lp.add_row(
            format!("down_ceiling[{id}]"),
            RowKind::Ge,
            vec![(reserve_down[i], -1.0), (down_share[i], -sp)],
            -g[i].down_reserve_cap,
        ));
    }
    for i in 0..ng {
        let sp = gen_spread[i];
        let id = &g[i].id;
        output_floor.push(lp.add_row(
            format!("output_floor[{id}]"),
            RowKind::Ge,
            vec![(dispatch[i], 1.0), (reserve_up[i], 1.0), (reserve_down[i], -1.0), (up_share[i], -sp), (down_share[i], -sp)],
            0.0,
        ));
    }
    for i in 0..ng {
        let sp = gen_spread[i];
        let id = &g[i].id;
        output_ceiling.push(lp.add_row(
            format!("output_ceiling[{id}]"),
            RowKind::Ge,
            vec![(dispatch[i], -1.0), (reserve_up[i], -1.0), (reserve_down[i], 1.0), (up_share[i], -sp), (down_share[i], -sp)],
            -g[i].capacity,
        ));
    }
    let mut curtail_floor = Vec::with_capacity(nl);
    let mut curtail_ceiling = Vec::with_capacity(nl);
    for j in 0..nl {
        let sp = load_spread[j];
        let id = &ld[j].id;
        curtail_floor.push(lp.add_row(
            format!("curtail_floor[{id}]"),
            RowKind::Ge,
            vec![(curtail[j], 1.0), (curtail_share[j], -sp)],
            0.0,
        ));
        curtail_ceiling.push(lp.add_row(
            format!("curtail_ceiling[{id}]"),
            RowKind::Ge,
            vec![(curtail[j], -1.0), (curtail_share[j], -sp)],
            -ld[j].demand,
        ));
    }
    let r = case.reference_index();
    let ref_sched_angle = lp.add_row("ref_sched_angle", RowKind::Eq, vec![(sched_angle[r], 1.0)], 0.0);
    let ref_rt_angle = lp.add_row("ref_rt_angle", RowKind::Eq, vec![(rt_angle[r], 1.0)], 0.0);

    Ok(DccoModel {
        lp,
        index: DccoIndex {
            dispatch,
            reserve_up,
            reserve_down,
            up_share,
            down_share,
            vres_sched,
            vres_spill,
            spill_share,
            sched_angle,
            rt_angle,
            curtail,
            curtail_share,
            balance,
            rebalance,
            control,
            line_sched,
            line_rt,
            vres_cap,
            gen_cap,
            spill_floor,
            spill_ceiling,
            up_floor,
            up_ceiling,
            down_floor,
            down_ceiling,
            output_floor,
            output_ceiling,
            curtail_floor,
            curtail_ceiling,
            ref_sched_angle,
            ref_rt_angle,
        },
        bus_quantile: q,
        gen_spread,
        load_spread,
    })
}

/// Optimal clearing of the chance-constrained market: every primal quantity
/// and every named multiplier, per generator, bus or load.
#[derive(Debug, Clone)]
pub struct CcoSolution {
    pub case: MarketCase,
    pub model: DccoModel,
    pub lp: LpSolution,
    pub objective: f64,
    pub face: FaceChoice,

    pub dispatch: Vec<f64>,
    pub reserve_up: Vec<f64>,
    pub reserve_down: Vec<f64>,
    pub up_share: Vec<f64>,
    pub down_share: Vec<f64>,
    pub vres_sched: Vec<f64>,
    pub vres_spill: Vec<f64>,
    pub spill_share: Vec<f64>,
    pub sched_angle: Vec<f64>,
    pub rt_angle: Vec<f64>,
    pub curtail: Vec<f64>,
    pub curtail_share: Vec<f64>,

    /// Scheduling-stage energy price per bus.
    pub balance_dual: Vec<f64>,
    /// Real-time rebalance price per bus.
    pub rebalance_dual: Vec<f64>,
    /// Control-budget multiplier per bus, zero where the row is absent.
    pub control_dual: Vec<f64>,
    pub vres_cap_dual: Vec<f64>,
    pub gen_cap_dual: Vec<f64>,
    pub spill_floor_dual: Vec<f64>,
    pub spill_ceiling_dual: Vec<f64>,
    pub up_floor_dual: Vec<f64>,
    pub up_ceiling_dual: Vec<f64>,
    pub down_floor_dual: Vec<f64>,
    pub down_ceiling_dual: Vec<f64>,
    pub output_floor_dual: Vec<f64>,
    pub output_ceiling_dual: Vec<f64>,
    pub curtail_floor_dual: Vec<f64>,
    pub curtail_ceiling_dual: Vec<f64>,

    /// Quantile-scaled spread per generator.
    pub gen_spread: Vec<f64>,
    pub load_spread: Vec<f64>,
}

impl CcoSolution {
    pub fn sigma(&self, n: usize) -> f64 {
        self.case.vres_at(n).sigma
    }

    pub fn generator_bus(&self, i: usize) -> usize {
        self.case.generator_bus(i)
    }

    pub fn load_bus(&self, j: usize) -> usize {
        self.case.load_bus(j)
    }

    /// Scheduled minus curtailed demand summed over all loads.
    pub fn served_demand(&self) -> f64 {
        self.case.loads.iter().zip(&self.curtail).map(|(l, s)| l.demand - s).sum()
    }
}

/// Which optimal solution is reported when the clearing has several.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceChoice {
    /// Whatever vertex the solver returned.
    Vertex,
    /// Among optimal schedules: most renewable output scheduled, then the
    /// cheapest scheduled energy, then the least upward participation, then
    /// the least load participation. Among the multipliers of that schedule:
    /// the largest spill adder at uncertain buses, then the smallest
    /// reserve-floor multipliers, then the smallest spill multipliers at
    /// certain buses.
    Canonical,
}

pub fn solve_cco(case: &MarketCase) -> Result<CcoSolution, ClearingError> {
    solve_cco_with(case, &RevisedSimplex::new(SolverOptions::default()))
}

pub fn solve_cco_with(case: &MarketCase, solver: &dyn LpSolver) -> Result<CcoSolution, ClearingError> {
    solve_cco_face(case, solver, FaceChoice::Canonical)
}

/// Like [`solve_cco_with`] with an explicit choice among optimal solutions.
/// A canonical refinement that breaks down numerically falls back to the
/// vertex, which is recorded in [`CcoSolution::face`].
pub fn solve_cco_face(case: &MarketCase, solver: &dyn LpSolver, choice: FaceChoice) -> Result<CcoSolution, ClearingError> {
    let model = build_dcco(case)?;
    let vertex = solver.solve(&model.lp)?;
    match vertex.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(ClearingError::Infeasible("chance-constrained clearing".into())),
        LpStatus::Unbounded => return Err(ClearingError::Unbounded("chance-constrained clearing".into())),
    }
    let (lp, face) = match choice {
        FaceChoice::Vertex => (vertex, FaceChoice::Vertex),
        FaceChoice::Canonical => match canonical_point(case, &model, &vertex, solver) {
            Some(lp) => (lp, FaceChoice::Canonical),
            None => (vertex, FaceChoice::Vertex),
        },
    };
    let ix = &model.index;
    let vals = |v: &[VarId]| v.iter().map(|&x| lp.value(x)).collect::<Vec<f64>>();
    let duals = |r: &[RowId]| r.iter().map(|&x| lp.dual(x)).collect::<Vec<f64>>();
    let sol = CcoSolution {
        objective: lp.objective,
        face,
        dispatch: vals(&ix.dispatch),
        reserve_up: vals(&ix.reserve_up),
        reserve_down: vals(&ix.reserve_down),
        up_share: vals(&ix.up_share),
        down_share: vals(&ix.down_share),
        vres_sched: vals(&ix.vres_sched),
        vres_spill: vals(&ix.vres_spill),
        spill_share: vals(&ix.spill_share),
        sched_angle: vals(&ix.sched_angle),
        rt_angle: vals(&ix.rt_angle),
        curtail: vals(&ix.curtail),
        curtail_share: vals(&ix.curtail_share),
        balance_dual: duals(&ix.balance),
        rebalance_dual: duals(&ix.rebalance),
        control_dual: ix.control.iter().map(|r| r.map_or(0.0, |r| lp.dual(r))).collect(),
        vres_cap_dual: duals(&ix.vres_cap),
        gen_cap_dual: duals(&ix.gen_cap),
        spill_floor_dual: duals(&ix.spill_floor),
        spill_ceiling_dual: duals(&ix.spill_ceiling),
        up_floor_dual: duals(&ix.up_floor),
        up_ceiling_dual: duals(&ix.up_ceiling),
        down_floor_dual: duals(&ix.down_floor),
        down_ceiling_dual: duals(&ix.down_ceiling),
        output_floor_dual: duals(&ix.output_floor),
        output_ceiling_dual: duals(&ix.output_ceiling),
        curtail_floor_dual: duals(&ix.curtail_floor),
        curtail_ceiling_dual: duals(&ix.curtail_ceiling),
        gen_spread: model.gen_spread.clone(),
        load_spread: model.load_spread.clone(),
        case: case.clone(),
        model,
        lp,
    };
    if sol.served_demand() <= ASSUMPTION_TOL {
        return Err(ClearingError::Assumption(format!(
            "served demand {:.3e} is not positive; the load price adder is undefined",
            sol.served_demand()
        )));
    }
    Ok(sol)
}

fn canonical_point(case: &MarketCase, model: &DccoModel, vertex: &LpSolution, solver: &dyn LpSolver) -> Option<LpSolution> {
    let ix = &model.index;
    let levels = vec![
        ix.vres_sched.iter().map(|&v| (v, -1.0)).collect(),
        ix.dispatch.iter().zip(&case.generators).map(|(&v, g)| (v, g.cost)).collect(),
        ix.up_share.iter().map(|&v| (v, 1.0)).collect(),
        ix.curtail_share.iter().map(|&v| (v, 1.0)).collect(),
    ];
    let (x, iterations) = face::refine_primal(&model.lp, vertex, &levels, solver).ok()?;
    // spill adders are maximized where output is uncertain and kept small
    // where it is not, so that a certain bus settles at its energy price
    let uncertain = |n: &usize| case.vres_at(*n).sigma > 0.0;
    let nb = case.buses.len();
    let dual_levels = vec![
        (0..nb).filter(uncertain).flat_map(|n| [(ix.spill_floor[n], 1.0), (ix.spill_ceiling[n], -1.0)]).collect(),
        ix.up_floor.iter().chain(&ix.down_floor).map(|&r| (r, -1.0)).collect(),
        (0..nb)
            .filter(|n| !uncertain(n))
            .flat_map(|n| [(ix.spill_floor[n], -1.0), (ix.spill_ceiling[n], -1.0)])
            .collect(),
    ];
    let duals = match face::select_duals(&model.lp, &x, &dual_levels, solver).ok()? {
        Some(y) => y,
        None => vertex.duals.clone(),
    };
    Some(face::assemble(&model.lp, x, duals, vertex.iterations + iterations))
}
