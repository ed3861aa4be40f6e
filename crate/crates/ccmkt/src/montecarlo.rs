//! Monte Carlo settlement of the chance-constrained market: draw forecast
//! errors, apply the affine recourse, settle every participant at the
//! uncertainty-uniform prices, and compare the empirical moments and bound
//! violations with their analytic counterparts.

use std::io::Write;

use crate::clearing::{unit_error, CcoSolution};
use crate::pricing::PriceSchedule;
use crate::profits::{cco_profits, ProfitReport};

/// Slack allowed before a realized quantity counts as outside its band.
pub const BOUND_TOL: f64 = 1e-9;
/// Largest tolerated per-draw money imbalance and rebalance residual.
pub const CONSERVATION_TOL: f64 = 1e-8;
/// Below this many draws the statistical checks are reported but not judged.
pub const MIN_DRAWS: usize = 1000;
/// Analytic spreads below this are treated as zero.
pub const SPREAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    UpFloor,
    UpCeiling,
    DownFloor,
    DownCeiling,
    OutputFloor,
    OutputCeiling,
    SpillFloor,
    SpillCeiling,
    CurtailFloor,
    CurtailCeiling,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::UpFloor => "up_floor",
            BoundKind::UpCeiling => "up_ceiling",
            BoundKind::DownFloor => "down_floor",
            BoundKind::DownCeiling => "down_ceiling",
            BoundKind::OutputFloor => "output_floor",
            BoundKind::OutputCeiling => "output_ceiling",
            BoundKind::SpillFloor => "spill_floor",
            BoundKind::SpillCeiling => "spill_ceiling",
            BoundKind::CurtailFloor => "curtail_floor",
            BoundKind::CurtailCeiling => "curtail_ceiling",
        }
    }
}

/// One individually chance-constrained bound of one element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub kind: BoundKind,
    pub element: String,
}

/// Every bound of the case in a fixed order: generators, then buses with a
/// renewable source, then loads.
pub fn bounds(sol: &CcoSolution) -> Vec<Bound> {
    let case = &sol.case;
    let mut out = Vec::new();
    for g in &case.generators {
        for kind in [
            BoundKind::UpFloor,
            BoundKind::UpCeiling,
            BoundKind::DownFloor,
            BoundKind::DownCeiling,
            BoundKind::OutputFloor,
            BoundKind::OutputCeiling,
        ] {
            out.push(Bound { kind, element: g.id.clone() });
        }
    }
    for v in &case.vres {
        for kind in [BoundKind::SpillFloor, BoundKind::SpillCeiling] {
            out.push(Bound { kind, element: format!("W{}", v.bus) });
        }
    }
    for l in &case.loads {
        for kind in [BoundKind::CurtailFloor, BoundKind::CurtailCeiling] {
            out.push(Bound { kind, element: l.id.clone() });
        }
    }
    out
}

/// Realized real-time state for one error draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTimeOutcome {
    /// Forecast error per bus.
    pub error: Vec<f64>,
    /// Realized renewable output per bus, not truncated at zero.
    pub output: Vec<f64>,
    pub reserve_up: Vec<f64>,
    pub reserve_down: Vec<f64>,
    pub spill: Vec<f64>,
    pub curtail: Vec<f64>,
    /// One flag per entry of [`bounds`].
    pub violations: Vec<bool>,
    /// Largest absolute bus rebalance residual.
    pub rebalance_residual: f64,
}

impl RealTimeOutcome {
    pub fn negative_output(&self) -> bool {
        self.output.iter().any(|&w| w < 0.0)
    }
}

/// Applies the affine recourse to the error vector `error` (one entry per
/// bus, ignored where the bus carries no uncertainty).
pub fn realize(sol: &CcoSolution, error: &[f64]) -> RealTimeOutcome {
    let case = &sol.case;
    let nb = case.buses.len();
    let err: Vec<f64> = (0..nb).map(|n| if sol.sigma(n) > 0.0 { error[n] } else { 0.0 }).collect();
    let gbus: Vec<usize> = (0..case.generators.len()).map(|i| sol.generator_bus(i)).collect();
    let lbus: Vec<usize> = (0..case.loads.len()).map(|j| sol.load_bus(j)).collect();

    let output: Vec<f64> = (0..nb).map(|n| case.vres_at(n).forecast + err[n]).collect();
    let reserve_up: Vec<f64> = gbus.iter().enumerate().map(|(i, &n)| sol.reserve_up[i] - sol.up_share[i] * err[n]).collect();
    let reserve_down: Vec<f64> =
        gbus.iter().enumerate().map(|(i, &n)| sol.reserve_down[i] + sol.down_share[i] * err[n]).collect();
    let spill: Vec<f64> = (0..nb).map(|n| sol.vres_spill[n] + sol.spill_share[n] * err[n]).collect();
    let curtail: Vec<f64> = lbus.iter().enumerate().map(|(j, &n)| sol.curtail[j] - sol.curtail_share[j] * err[n]).collect();

    let below = |v: f64, floor: f64| v < floor - BOUND_TOL * (1.0 + floor.abs());
    let mut violations = Vec::new();
    for (i, g) in case.generators.iter().enumerate() {
        let out = sol.dispatch[i] + reserve_up[i] - reserve_down[i];
        violations.extend([
            below(reserve_up[i], 0.0),
            below(g.up_reserve_cap, reserve_up[i]),
            below(reserve_down[i], 0.0),
            below(g.down_reserve_cap, reserve_down[i]),
            below(out, 0.0),
            below(g.capacity, out),
        ]);
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        violations.extend([below(spill[n], 0.0), below(output[n], spill[n])]);
    }
    for (j, l) in case.loads.iter().enumerate() {
        violations.extend([below(curtail[j], 0.0), below(l.demand, curtail[j])]);
    }

    let mut residual: f64 = 0.0;
    for n in 0..nb {
        let mut r = output[n] - sol.vres_sched[n] - spill[n];
        for i in (0..gbus.len()).filter(|&i| gbus[i] == n) {
            r += reserve_up[i] - reserve_down[i];
        }
        for j in (0..lbus.len()).filter(|&j| lbus[j] == n) {
            r += curtail[j];
        }
        for k in 0..case.lines.len() {
            let (a, b) = case.line_ends(k);
            let other = if a == n {
                b
            } else if b == n {
                a
            } else {
                continue;
            };
            let s = case.lines[k].susceptance;
            r += s * (sol.sched_angle[n] - sol.rt_angle[n] - sol.sched_angle[other] + sol.rt_angle[other]);
        }
        residual = residual.max(r.abs());
    }
    RealTimeOutcome { error: err, output, reserve_up, reserve_down, spill, curtail, violations, rebalance_residual: residual }
}

/// Cash received from the market and profit per participant for one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    /// Operator profit from the income formula at the realized quantities.
    pub operator: f64,
    pub generator_cash: Vec<f64>,
    pub generator_profit: Vec<f64>,
    /// Per bus; zero where there is no renewable source.
    pub vres_cash: Vec<f64>,
    pub vres_profit: Vec<f64>,
    /// Curtailment refund minus the scheduled payment; equal to the surplus.
    pub load_cash: Vec<f64>,
    /// Operator income plus all participant cash; zero when books balance.
    pub imbalance: f64,
}

impl Settlement {
    /// Profits in the order of [`ProfitReport::rows`].
    pub fn profit_row(&self, sol: &CcoSolution) -> Vec<f64> {
        let mut row = vec![self.operator];
        row.extend(&self.generator_profit);
        for v in &sol.case.vres {
            row.push(self.vres_profit[sol.case.bus_index(&v.bus).expect("validated")]);
        }
        row.extend(&self.load_cash);
        row
    }
}

/// Settles one outcome. Participants are paid at the composed prices in
/// `prices`; the operator side is evaluated from the underlying multipliers,
/// so a price list that does not match them shows up as an imbalance.
pub fn settle(outcome: &RealTimeOutcome, prices: &PriceSchedule, sol: &CcoSolution) -> Settlement {
    let case = &sol.case;
    let nb = case.buses.len();
    let lambda = &sol.balance_dual;
    let nu = &sol.rebalance_dual;
    let spill_adder: Vec<f64> = (0..nb).map(|n| sol.spill_floor_dual[n] - sol.spill_ceiling_dual[n]).collect();

    let mut generator_cash = Vec::with_capacity(case.generators.len());
    let mut generator_profit = Vec::with_capacity(case.generators.len());
    for (i, g) in case.generators.iter().enumerate() {
        let (p, ru, rd) = (sol.dispatch[i], outcome.reserve_up[i], outcome.reserve_down[i]);
        let cash = prices.generator_energy[i] * p + prices.generator_up[i] * ru - prices.generator_down[i] * rd;
        let cost = g.cost * p + g.up_cost * ru - g.down_saving * rd;
        generator_cash.push(cash);
        generator_profit.push(cash - cost);
    }
    let mut vres_cash = vec![0.0; nb];
    let mut vres_profit = vec![0.0; nb];
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        let deviation = outcome.output[n] - sol.vres_sched[n] - outcome.spill[n];
        let cash = prices.vres_schedule[n] * sol.vres_sched[n] + prices.vres_deviation[n] * deviation;
        vres_cash[n] = cash;
        vres_profit[n] = cash - v.cost * (outcome.output[n] - outcome.spill[n]);
    }
    let load_cash: Vec<f64> = case
        .loads
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let n = sol.load_bus(j);
            prices.curtailment[n] * outcome.curtail[j] - prices.load_schedule[n] * l.demand
        })
        .collect();

    let mut operator = 0.0;
    for n in 0..nb {
        let gens: Vec<usize> = (0..case.generators.len()).filter(|&i| sol.generator_bus(i) == n).collect();
        let loads: Vec<usize> = (0..case.loads.len()).filter(|&j| sol.load_bus(j) == n).collect();
        let demand: f64 = loads.iter().map(|&j| case.loads[j].demand).sum();
        let scheduled: f64 = gens.iter().map(|&i| sol.dispatch[i]).sum::<f64>() + sol.vres_sched[n];
        let mut realtime = outcome.output[n] - sol.vres_sched[n] - outcome.spill[n];
        let mut adders = 0.0;
        for &i in &gens {
            realtime += outcome.reserve_up[i] - outcome.reserve_down[i];
            adders += prices.tau[i].up * outcome.reserve_up[i] + prices.tau[i].down * outcome.reserve_down[i];
        }
        let mut served = 0.0;
        for &j in &loads {
            realtime += outcome.curtail[j];
            served += case.loads[j].demand - outcome.curtail[j];
        }
        operator += lambda[n] * (demand - scheduled) - nu[n] * realtime - adders
            + spill_adder[n] * (outcome.output[n] - outcome.spill[n])
            + prices.zeta * served;
    }
    let imbalance = operator + generator_cash.iter().sum::<f64>() + vres_cash.iter().sum::<f64>() + load_cash.iter().sum::<f64>();
    Settlement { operator, generator_cash, generator_profit, vres_cash, vres_profit, load_cash, imbalance }
}

/// Error vector for draw `k`: one stream per bus, one counter per draw.
pub fn draw_errors(sol: &CcoSolution, seed: u64, k: u64) -> Vec<f64> {
    (0..sol.case.buses.len())
        .map(|n| {
            let sigma = sol.sigma(n);
            if sigma > 0.0 {
                sigma * unit_error(sol.case.distribution_at(n), seed, n as u64, k)
            } else {
                0.0
            }
        })
        .collect()
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Empirical against analytic moments for one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantStats {
    pub participant: String,
    pub analytic_mean: f64,
    pub analytic_std: f64,
    pub mean: f64,
    /// `None` for a single draw.
    pub std: Option<f64>,
    pub std_error: Option<f64>,
    /// `(mean − analytic_mean) / std_error`; zero when both spreads vanish.
    pub z_score: f64,
    /// Relative gap between the empirical and analytic spread.
    pub std_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundStats {
    pub bound: Bound,
    pub count: u64,
    pub frequency: f64,
    /// Violation tolerance plus three binomial standard errors.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    pub draws: usize,
    pub seed: u64,
    pub participants: Vec<ParticipantStats>,
    pub bounds: Vec<BoundStats>,
    pub max_imbalance: f64,
    pub max_rebalance_residual: f64,
    /// Draws with some realized renewable output below zero.
    pub negative_output_draws: u64,
}

impl EmpiricalStats {
    pub fn insufficient(&self) -> bool {
        self.draws < MIN_DRAWS
    }

    /// Relative tolerance on the spread: 3%, widened at small sample sizes
    /// to four standard errors of a normal sample standard deviation.
    pub fn std_tolerance(&self) -> f64 {
        0.03f64.max(4.0 / (2.0 * self.draws as f64).sqrt())
    }

    pub fn means_pass(&self) -> bool {
        self.participants.iter().all(|p| p.z_score.abs() <= 4.0)
    }

    pub fn stds_pass(&self) -> bool {
        let tol = self.std_tolerance();
        self.participants
            .iter()
            .filter(|p| p.analytic_std > SPREAD_FLOOR)
            .all(|p| p.std_gap.is_some_and(|g| g.abs() <= tol))
    }

    pub fn bounds_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.frequency <= b.limit)
    }

    pub fn books_balance(&self) -> bool {
        self.max_imbalance <= CONSERVATION_TOL && self.max_rebalance_residual <= CONSERVATION_TOL
    }

    /// Statistical verdict; always true below [`MIN_DRAWS`].
    pub fn statistics_pass(&self) -> bool {
        self.insufficient() || (self.means_pass() && self.stds_pass() && self.bounds_pass())
    }
}

/// Runs `draws` settlements and summarizes them against the analytic report.
pub fn simulate(sol: &CcoSolution, prices: &PriceSchedule, draws: usize, seed: u64) -> EmpiricalStats {
    simulate_traced(sol, prices, draws, seed, None::<&mut Vec<u8>>).expect("in-memory trace cannot fail")
}

/// [`simulate`] that also writes one CSV row per draw: draw id, error per
/// bus, profit per participant.
pub fn simulate_traced<W: Write>(
    sol: &CcoSolution,
    prices: &PriceSchedule,
    draws: usize,
    seed: u64,
    trace: Option<W>,
) -> csv::Result<EmpiricalStats> {
    let draws = draws.max(1);
    let report: ProfitReport = cco_profits(sol, prices);
    let rows = report.rows(sol);
    let all_bounds = bounds(sol);
    let mut trace = trace.map(csv::Writer::from_writer);
    if let Some(w) = trace.as_mut() {
        let mut header = vec!["draw".to_string()];
        header.extend(sol.case.buses.iter().map(|b| format!("error_{b}")));
        header.extend(rows.iter().map(|(who, _)| who.clone()));
        w.write_record(&header)?;
    }

    // moments about the analytic mean keep the sums well conditioned
    let mut first = vec![Neumaier::default(); rows.len()];
    let mut second = vec![Neumaier::default(); rows.len()];
    let mut counts = vec![0u64; all_bounds.len()];
    let mut max_imbalance: f64 = 0.0;
    let mut max_residual: f64 = 0.0;
    let mut negative = 0;
    for k in 0..draws as u64 {
        let error = draw_errors(sol, seed, k);
        let outcome = realize(sol, &error);
        let settled = settle(&outcome, prices, sol);
        let profit = settled.profit_row(sol);
        for (t, (v, (_, analytic))) in profit.iter().zip(&rows).enumerate() {
            let d = v - analytic.expected;
            first[t].add(d);
            second[t].add(d * d);
        }
        for (c, &hit) in counts.iter_mut().zip(&outcome.violations) {
            *c += u64::from(hit);
        }
        max_imbalance = max_imbalance.max(settled.imbalance.abs());
        max_residual = max_residual.max(outcome.rebalance_residual);
        negative += u64::from(outcome.negative_output());
        if let Some(w) = trace.as_mut() {
            let mut rec = vec![k.to_string()];
            rec.extend(outcome.error.iter().map(|v| v.to_string()));
            rec.extend(profit.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    if let Some(w) = trace.as_mut() {
        w.flush()?;
    }

    let n = draws as f64;
    let participants = rows
        .iter()
        .enumerate()
        .map(|(t, (who, analytic))| {
            let shift = first[t].value() / n;
            let mean = analytic.expected + shift;
            let (std, std_error) = if draws > 1 {
                let var = ((second[t].value() - n * shift * shift) / (n - 1.0)).max(0.0);
                (Some(var.sqrt()), Some((var / n).sqrt()))
            } else {
                (None, None)
            };
            let z_score = match std_error {
                Some(se) if se > 0.0 => shift / se,
                _ if shift.abs() <= CONSERVATION_TOL * (1.0 + analytic.expected.abs()) => 0.0,
                _ => f64::INFINITY,
            };
            let std_gap = match std {
                Some(s) if analytic.std > SPREAD_FLOOR => Some(s / analytic.std - 1.0),
                _ => None,
            };
            ParticipantStats {
                participant: who.clone(),
                analytic_mean: analytic.expected,
                analytic_std: analytic.std,
                mean,
                std,
                std_error,
                z_score,
                std_gap,
            }
        })
        .collect();
    let eps = sol.case.epsilon;
    let limit = eps + 3.0 * (eps * (1.0 - eps) / n).sqrt();
    let bounds = all_bounds
        .into_iter()
        .zip(counts)
        .map(|(bound, count)| BoundStats { bound, count, frequency: count as f64 / n, limit })
        .collect();
    Ok(EmpiricalStats {
        draws,
        seed,
        participants,
        bounds,
        max_imbalance,
        max_rebalance_residual: max_residual,
        negative_output_draws: negative,
    })
}

/// Writes the empirical-versus-analytic table.
pub fn write_stats_csv<W: Write>(stats: &EmpiricalStats, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "participant",
        "analytic_mean",
        "empirical_mean",
        "std_error",
        "z_score",
        "analytic_std",
        "empirical_std",
        "std_gap",
        "insufficient_n",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
    for p in &stats.participants {
        w.write_record([
            p.participant.clone(),
            format!("{:.6}", p.analytic_mean),
            format!("{:.6}", p.mean),
            opt(p.std_error),
            format!("{:.4}", p.z_score),
            format!("{:.6}", p.analytic_std),
            opt(p.std),
            opt(p.std_gap),
            stats.insufficient().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per bound with its violation count and frequency.
pub fn write_violations_csv<W: Write>(stats: &EmpiricalStats, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["element", "bound", "violations", "frequency", "limit", "within_limit"])?;
    for b in &stats.bounds {
        w.write_record([
            b.bound.element.clone(),
            b.bound.kind.name().to_string(),
            b.count.to_string(),
            format!("{:.6}", b.frequency),
            format!("{:.6}", b.limit),
            (b.frequency <= b.limit).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
