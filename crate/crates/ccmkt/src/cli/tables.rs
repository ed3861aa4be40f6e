//! Table layouts shared by the commands: dispatch and price tables, the
//! long-format cell list used by the reproduction diff, and histogram data.

use std::io::Write;

use crate::clearing::{CcoSolution, SoSolution};
use crate::pricing::{weighted_moments, PriceSchedule, SoPriceSchedule};
use crate::profits::{fmt_fixed, ProfitReport, SoProfitReport};

/// Width of a histogram bin in price units.
pub const BIN_WIDTH: f64 = 0.5;

/// One numeric entry of a reproduced table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub case: String,
    pub section: String,
    pub element: String,
    pub field: String,
    pub value: f64,
}

struct CellSink<'a> {
    case: &'a str,
    cells: Vec<Cell>,
}

impl CellSink<'_> {
    fn push(&mut self, section: &str, element: &str, field: &str, value: f64) {
        self.cells.push(Cell {
            case: self.case.to_string(),
            section: section.to_string(),
            element: element.to_string(),
            field: field.to_string(),
            value,
        });
    }
}

/// Scheduling, real-time and profit cells of a chance-constrained clearing.
pub fn cco_cells(case_label: &str, sol: &CcoSolution, prices: &PriceSchedule, report: &ProfitReport) -> Vec<Cell> {
    let case = &sol.case;
    let mut out = CellSink { case: case_label, cells: Vec::new() };
    for (i, g) in case.generators.iter().enumerate() {
        out.push("schedule", &g.id, "quantity", sol.dispatch[i]);
        out.push("schedule", &g.id, "price", prices.generator_energy[i]);
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        let who = format!("W{}", v.bus);
        out.push("schedule", &who, "quantity", sol.vres_sched[n]);
        out.push("schedule", &who, "price", prices.vres_schedule[n]);
    }
    for (j, l) in case.loads.iter().enumerate() {
        out.push("schedule", &l.id, "quantity", l.demand);
        out.push("schedule", &l.id, "price", prices.load_schedule[sol.load_bus(j)]);
    }
    for (i, g) in case.generators.iter().enumerate() {
        let s = sol.sigma(sol.generator_bus(i));
        out.push("realtime", &g.id, "up", sol.reserve_up[i]);
        out.push("realtime", &g.id, "up_std", sol.up_share[i] * s);
        out.push("realtime", &g.id, "up_price", prices.generator_up[i]);
        out.push("realtime", &g.id, "down", sol.reserve_down[i]);
        out.push("realtime", &g.id, "down_std", sol.down_share[i] * s);
        out.push("realtime", &g.id, "down_price", prices.generator_down[i]);
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        let who = format!("W{}", v.bus);
        out.push("realtime", &who, "spill", sol.vres_spill[n]);
        out.push("realtime", &who, "spill_std", (sol.spill_share[n] * v.sigma).abs());
        out.push("realtime", &who, "spill_price", prices.vres_deviation[n]);
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = sol.load_bus(j);
        out.push("realtime", &l.id, "curtail", sol.curtail[j]);
        out.push("realtime", &l.id, "curtail_std", (sol.curtail_share[j] * sol.sigma(n)).abs());
        out.push("realtime", &l.id, "curtail_price", prices.curtailment[n]);
    }
    for (who, p) in report.rows(sol) {
        out.push("profit", &who, "expected", p.expected);
        out.push("profit", &who, "std", p.std);
    }
    out.cells
}

/// Real-time price moments per action and profit cells of a scenario-based
/// clearing. Prices are uniform per bus, so every action at a bus repeats
/// that bus's moments.
pub fn so_cells(case_label: &str, sol: &SoSolution, prices: &SoPriceSchedule, report: &SoProfitReport) -> Vec<Cell> {
    let case = &sol.case;
    let mut out = CellSink { case: case_label, cells: Vec::new() };
    for (i, g) in case.generators.iter().enumerate() {
        let n = case.generator_bus(i);
        for action in ["up", "down"] {
            out.push("so_price", &g.id, &format!("{action}_mean"), prices.realtime_mean[n]);
            out.push("so_price", &g.id, &format!("{action}_std"), prices.realtime_std[n]);
        }
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        let who = format!("W{}", v.bus);
        out.push("so_price", &who, "spill_mean", prices.realtime_mean[n]);
        out.push("so_price", &who, "spill_std", prices.realtime_std[n]);
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = case.load_bus(j);
        out.push("so_price", &l.id, "curtail_mean", prices.realtime_mean[n]);
        out.push("so_price", &l.id, "curtail_std", prices.realtime_std[n]);
    }
    for (who, p) in report.rows(sol) {
        out.push("so_profit", &who, "expected", p.expected);
        out.push("so_profit", &who, "std", p.std);
    }
    out.cells
}

pub fn write_cells_csv<W: Write>(cells: &[Cell], digits: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "section", "element", "field", "value"])?;
    for c in cells {
        w.write_record([&c.case, &c.section, &c.element, &c.field, &fmt_fixed(c.value, digits)])?;
    }
    w.flush()?;
    Ok(())
}

/// Quantities of both stages with their spread and price.
pub fn write_dispatch_csv<W: Write>(sol: &CcoSolution, prices: &PriceSchedule, digits: usize, out: W) -> csv::Result<()> {
    let case = &sol.case;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["element", "action", "stage", "expected", "std", "price"])?;
    let mut row = |who: &str, action: &str, stage: &str, q: f64, s: f64, p: f64| {
        w.write_record([who, action, stage, &fmt_fixed(q, digits), &fmt_fixed(s.abs(), digits), &fmt_fixed(p, digits)])
    };
    for (i, g) in case.generators.iter().enumerate() {
        row(&g.id, "energy", "scheduling", sol.dispatch[i], 0.0, prices.generator_energy[i])?;
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        row(&format!("W{}", v.bus), "schedule", "scheduling", sol.vres_sched[n], 0.0, prices.vres_schedule[n])?;
    }
    for (j, l) in case.loads.iter().enumerate() {
        row(&l.id, "consumption", "scheduling", l.demand, 0.0, prices.load_schedule[sol.load_bus(j)])?;
    }
    for (i, g) in case.generators.iter().enumerate() {
        let s = sol.sigma(sol.generator_bus(i));
        row(&g.id, "reserve_up", "realtime", sol.reserve_up[i], sol.up_share[i] * s, prices.generator_up[i])?;
        row(&g.id, "reserve_down", "realtime", sol.reserve_down[i], sol.down_share[i] * s, prices.generator_down[i])?;
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        let s = sol.spill_share[n] * v.sigma;
        row(&format!("W{}", v.bus), "spill", "realtime", sol.vres_spill[n], s, prices.vres_deviation[n])?;
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = sol.load_bus(j);
        let s = sol.curtail_share[j] * sol.sigma(n);
        row(&l.id, "curtailment", "realtime", sol.curtail[j], s, prices.curtailment[n])?;
    }
    w.flush()?;
    Ok(())
}

/// Same layout as the rounded price table, for the CLI.
pub fn write_rounded_prices_csv<W: Write>(
    sol: &CcoSolution,
    prices: &PriceSchedule,
    digits: usize,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant", "action", "bus", "price"])?;
    for r in price_lines(sol, prices) {
        w.write_record([&r.participant, r.action, &r.bus, &fmt_fixed(r.cco, digits)])?;
    }
    w.flush()?;
    Ok(())
}

/// Scenario-weighted moments of the second-stage quantities.
pub fn write_so_dispatch_csv<W: Write>(sol: &SoSolution, digits: usize, out: W) -> csv::Result<()> {
    let case = &sol.case;
    let prob = &sol.scenarios.probability;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["element", "action", "stage", "expected", "std"])?;
    let mut row = |who: &str, action: &str, stage: &str, (m, s): (f64, f64)| {
        w.write_record([who, action, stage, &fmt_fixed(m, digits), &fmt_fixed(s, digits)])
    };
    let column = |table: &[Vec<f64>], k: usize| weighted_moments(prob, table.iter().map(|r| r[k]));
    for (i, g) in case.generators.iter().enumerate() {
        row(&g.id, "energy", "scheduling", (sol.dispatch[i], 0.0))?;
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        row(&format!("W{}", v.bus), "schedule", "scheduling", (sol.vres_sched[n], 0.0))?;
    }
    for l in &case.loads {
        row(&l.id, "consumption", "scheduling", (l.demand, 0.0))?;
    }
    for (i, g) in case.generators.iter().enumerate() {
        row(&g.id, "reserve_up", "realtime", column(&sol.reserve_up, i))?;
        row(&g.id, "reserve_down", "realtime", column(&sol.reserve_down, i))?;
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        row(&format!("W{}", v.bus), "spill", "realtime", column(&sol.vres_spill, n))?;
    }
    for (j, l) in case.loads.iter().enumerate() {
        row(&l.id, "curtailment", "realtime", column(&sol.curtail, j))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_so_prices_csv<W: Write>(sol: &SoSolution, prices: &SoPriceSchedule, digits: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus", "scheduling", "realtime_mean", "realtime_std"])?;
    for (n, bus) in sol.case.buses.iter().enumerate() {
        w.write_record([
            bus.as_str(),
            &fmt_fixed(prices.energy[n], digits),
            &fmt_fixed(prices.realtime_mean[n], digits),
            &fmt_fixed(prices.realtime_std[n], digits),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-scenario real-time prices at full precision.
pub fn write_so_price_series_csv<W: Write>(sol: &SoSolution, prices: &SoPriceSchedule, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "bus", "probability", "price"])?;
    for (k, row) in prices.realtime.iter().enumerate() {
        for (n, bus) in sol.case.buses.iter().enumerate() {
            w.write_record([&k.to_string(), bus, &sol.scenarios.probability[k].to_string(), &row[n].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One priced action under both schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceLine {
    pub participant: String,
    pub action: &'static str,
    pub stage: &'static str,
    pub bus: String,
    pub cco: f64,
    /// Scenario mean and spread, when a scenario-based clearing is supplied.
    pub so: Option<(f64, f64)>,
}

/// Price of every participant action, optionally paired with the
/// scenario-based price of the same action.
pub fn price_lines(sol: &CcoSolution, prices: &PriceSchedule) -> Vec<PriceLine> {
    price_comparison(sol, prices, None)
}

pub fn price_comparison(sol: &CcoSolution, prices: &PriceSchedule, so: Option<&SoPriceSchedule>) -> Vec<PriceLine> {
    let case = &sol.case;
    let mut out = Vec::new();
    let sched = |n: usize| so.map(|p| (p.energy[n], 0.0));
    let rt = |n: usize| so.map(|p| (p.realtime_mean[n], p.realtime_std[n]));
    let mut line = |participant: String, action, stage, n: usize, cco, so| {
        out.push(PriceLine { participant, action, stage, bus: case.buses[n].clone(), cco, so });
    };
    for (i, g) in case.generators.iter().enumerate() {
        let n = case.generator_bus(i);
        line(g.id.clone(), "energy", "scheduling", n, prices.generator_energy[i], sched(n));
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        line(format!("W{}", v.bus), "schedule", "scheduling", n, prices.vres_schedule[n], sched(n));
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = case.load_bus(j);
        line(l.id.clone(), "consumption", "scheduling", n, prices.load_schedule[n], sched(n));
    }
    for (i, g) in case.generators.iter().enumerate() {
        let n = case.generator_bus(i);
        line(g.id.clone(), "reserve_up", "realtime", n, prices.generator_up[i], rt(n));
    }
    for (i, g) in case.generators.iter().enumerate() {
        let n = case.generator_bus(i);
        line(g.id.clone(), "reserve_down", "realtime", n, prices.generator_down[i], rt(n));
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        line(format!("W{}", v.bus), "spill", "realtime", n, prices.vres_deviation[n], rt(n));
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = case.load_bus(j);
        line(l.id.clone(), "curtailment", "realtime", n, prices.curtailment[n], rt(n));
    }
    out
}

pub fn write_comparison_csv<W: Write>(lines: &[PriceLine], digits: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant", "action", "stage", "bus", "cco", "so_mean", "so_std"])?;
    for l in lines {
        let (m, s) = match l.so {
            Some((m, s)) => (fmt_fixed(m, digits), fmt_fixed(s, digits)),
            None => (String::new(), String::new()),
        };
        w.write_record([&l.participant, l.action, l.stage, &l.bus, &fmt_fixed(l.cco, digits), &m, &s])?;
    }
    w.flush()?;
    Ok(())
}

/// How each action is priced under the two schemes, in terms of the
/// multipliers the clearing reports.
pub const PRICE_RULES: [(&str, &str, &str, &str); 7] = [
    ("energy", "scheduling", "energy", "energy"),
    ("schedule", "scheduling", "energy - spill_floor + spill_ceiling", "energy"),
    ("consumption", "scheduling", "energy + load_adder", "energy"),
    ("curtailment", "realtime", "rebalance + load_adder", "rebalance[s] / probability[s]"),
    ("reserve_up", "realtime", "rebalance + up_adder", "rebalance[s] / probability[s]"),
    ("reserve_down", "realtime", "rebalance - down_adder", "rebalance[s] / probability[s]"),
    ("spill", "realtime", "rebalance - spill_floor + spill_ceiling", "rebalance[s] / probability[s]"),
];

pub fn write_price_rules_csv<W: Write>(out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["action", "stage", "cco", "so"])?;
    for r in PRICE_RULES {
        w.write_record([r.0, r.1, r.2, r.3])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: u64,
    pub probability: f64,
}

/// Bins of width [`BIN_WIDTH`] covering `[min − 1, max + 1]`. Weights give
/// each value's probability mass.
pub fn histogram(values: &[f64], weights: &[f64]) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let count = ((hi - lo) / BIN_WIDTH).ceil().max(1.0) as usize;
    let mut bins: Vec<HistogramBin> = (0..count)
        .map(|k| HistogramBin {
            low: lo + k as f64 * BIN_WIDTH,
            high: lo + (k + 1) as f64 * BIN_WIDTH,
            count: 0,
            probability: 0.0,
        })
        .collect();
    for (v, w) in values.iter().zip(weights) {
        let k = (((v - lo) / BIN_WIDTH).floor() as usize).min(count - 1);
        bins[k].count += 1;
        bins[k].probability += w;
    }
    bins
}

/// Histogram of the scenario real-time prices at every bus.
pub fn write_histogram_csv<W: Write>(sol: &SoSolution, prices: &SoPriceSchedule, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus", "bin_low", "bin_high", "count", "probability"])?;
    for (n, bus) in sol.case.buses.iter().enumerate() {
        let values: Vec<f64> = prices.realtime.iter().map(|r| r[n]).collect();
        for b in histogram(&values, &sol.scenarios.probability) {
            w.write_record([bus, &b.low.to_string(), &b.high.to_string(), &b.count.to_string(), &b.probability.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
