//! Expected profits and their spread for every market participant, the
//! operator's income decomposition, and adequacy verdicts.

use std::io::Write;

use crate::clearing::{CcoSolution, SoSolution};
use crate::pricing::{weighted_moments, PriceSchedule, SoPriceSchedule};

/// Absolute tolerance for adequacy and identity checks.
pub const ADEQUACY_TOL: f64 = 1e-6;

/// Scenario counts above this are aggregated without keeping intermediates.
pub const INTERMEDIATE_LIMIT: usize = 10_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ProfitError {
    #[error("internal identity violated: {0}")]
    Identity(String),
    #[error("{participant} has expected profit {margin:.6}, below zero")]
    Adequacy { participant: String, margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Profit {
    pub expected: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorProfit {
    pub expected: f64,
    /// Spread under independent per-bus errors.
    pub std: f64,
    /// Income from stage-price differences, equal to the congestion rent.
    pub price_part: f64,
    /// Income from the reserve, spill and load adders; zero by construction.
    pub adder_part: f64,
    /// Value of the angle subproblem at the optimal angles.
    pub congestion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorProfit {
    pub expected: f64,
    pub std: f64,
    pub price_part: f64,
    pub adder_part: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfitReport {
    pub operator: OperatorProfit,
    /// Per bus, following `case.buses`.
    pub vres: Vec<Profit>,
    pub generators: Vec<GeneratorProfit>,
    pub loads: Vec<Profit>,
}

pub fn cco_operator_profit(sol: &CcoSolution, prices: &PriceSchedule) -> OperatorProfit {
    let case = &sol.case;
    let nb = case.buses.len();
    let lambda = &sol.balance_dual;
    let nu = &sol.rebalance_dual;
    let mut price_part = 0.0;
    let mut adder_part = 0.0;
    let mut variance = 0.0;
    for n in 0..nb {
        let v = case.vres_at(n);
        let gens: Vec<usize> = (0..case.generators.len()).filter(|&i| sol.generator_bus(i) == n).collect();
        let loads: Vec<usize> = (0..case.loads.len()).filter(|&j| sol.load_bus(j) == n).collect();
        let demand: f64 = loads.iter().map(|&j| case.loads[j].demand).sum();
        let sched: f64 = gens.iter().map(|&i| sol.dispatch[i]).sum::<f64>() + sol.vres_sched[n];
        let net_reserve: f64 = gens.iter().map(|&i| sol.reserve_up[i] - sol.reserve_down[i]).sum();
        let curtail: f64 = loads.iter().map(|&j| sol.curtail[j]).sum();
        price_part += lambda[n] * (demand - sched)
            - nu[n] * (net_reserve + curtail + v.forecast - sol.vres_sched[n] - sol.vres_spill[n]);

        let spill = sol.spill_floor_dual[n] - sol.spill_ceiling_dual[n];
        let reserve_adder: f64 = gens
            .iter()
            .map(|&i| prices.tau[i].up * sol.reserve_up[i] + prices.tau[i].down * sol.reserve_down[i])
            .sum();
        adder_part -= reserve_adder - spill * (v.forecast - sol.vres_spill[n]);
        adder_part += prices.zeta * loads.iter().map(|&j| case.loads[j].demand - sol.curtail[j]).sum::<f64>();

        let mut slope: f64 = gens
            .iter()
            .map(|&i| {
                sol.up_share[i] * (nu[n] + prices.tau[i].up) + sol.down_share[i] * (nu[n] - prices.tau[i].down)
            })
            .sum();
        slope -= prices.vres_deviation[n] * (1.0 - sol.spill_share[n]);
        slope += loads.iter().map(|&j| sol.curtail_share[j] * (nu[n] + prices.zeta)).sum::<f64>();
        variance += (v.sigma * slope).powi(2);
    }
    OperatorProfit {
        expected: price_part + adder_part,
        std: variance.sqrt(),
        price_part,
        adder_part,
        congestion: congestion_value(sol),
    }
}

/// Objective of the angle subproblem evaluated at the optimal angles.
pub fn congestion_value(sol: &CcoSolution) -> f64 {
    let case = &sol.case;
    let mut z = 0.0;
    for k in 0..case.lines.len() {
        let (a, b) = case.line_ends(k);
        let s = case.lines[k].susceptance;
        for (n, l) in [(a, b), (b, a)] {
            let sched = s * (sol.sched_angle[n] - sol.sched_angle[l]);
            let shift = s * (sol.sched_angle[n] - sol.rt_angle[n] - sol.sched_angle[l] + sol.rt_angle[l]);
            z += sol.balance_dual[n] * sched - sol.rebalance_dual[n] * shift;
        }
    }
    z
}

pub fn cco_vres_profit(sol: &CcoSolution, prices: &PriceSchedule) -> Vec<Profit> {
    (0..sol.case.buses.len())
        .map(|n| {
            let v = sol.case.vres_at(n);
            let margin = prices.vres_deviation[n] - v.cost;
            Profit {
                expected: sol.vres_cap_dual[n] * sol.vres_sched[n] + margin * v.forecast,
                std: (margin * (1.0 - sol.spill_share[n]) * v.sigma).abs(),
            }
        })
        .collect()
}

pub fn cco_generator_profit(sol: &CcoSolution, prices: &PriceSchedule) -> Vec<GeneratorProfit> {
    sol.case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let n = sol.generator_bus(i);
            let (lambda, nu) = (sol.balance_dual[n], sol.rebalance_dual[n]);
            let (p, ru, rd) = (sol.dispatch[i], sol.reserve_up[i], sol.reserve_down[i]);
            let t = prices.tau[i];
            let price_part = -g.cost * p - g.up_cost * ru + g.down_saving * rd + lambda * p + nu * (ru - rd);
            let adder_part = t.up * ru + t.down * rd;
            let slope = sol.up_share[i] * (g.up_cost - nu - t.up) + sol.down_share[i] * (g.down_saving - nu + t.down);
            GeneratorProfit {
                expected: price_part + adder_part,
                std: slope.abs() * sol.sigma(n),
                price_part,
                adder_part,
            }
        })
        .collect()
}

pub fn cco_consumer_surplus(sol: &CcoSolution, prices: &PriceSchedule) -> Vec<Profit> {
    sol.case
        .loads
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let n = sol.load_bus(j);
            Profit {
                expected: prices.curtailment[n] * sol.curtail[j] - prices.load_schedule[n] * l.demand,
                std: (prices.curtailment[n] * sol.curtail_share[j] * sol.sigma(n)).abs(),
            }
        })
        .collect()
}

pub fn cco_profits(sol: &CcoSolution, prices: &PriceSchedule) -> ProfitReport {
    ProfitReport {
        operator: cco_operator_profit(sol, prices),
        vres: cco_vres_profit(sol, prices),
        generators: cco_generator_profit(sol, prices),
        loads: cco_consumer_surplus(sol, prices),
    }
}

impl ProfitReport {
    /// Checks the decomposition identities and the adequacy of the operator,
    /// every renewable source and every generator.
    pub fn verify(&self, sol: &CcoSolution, tol: f64) -> Result<(), ProfitError> {
        let op = &self.operator;
        if op.adder_part.abs() > tol {
            return Err(ProfitError::Identity(format!("adder income {:.3e} is not zero", op.adder_part)));
        }
        if (op.price_part + op.congestion).abs() > tol {
            return Err(ProfitError::Identity(format!(
                "price income {:.9} differs from minus the congestion value {:.9}",
                op.price_part, op.congestion
            )));
        }
        if op.congestion > tol {
            return Err(ProfitError::Identity(format!("congestion value {:.3e} is positive", op.congestion)));
        }
        for v in self.verdicts(sol, tol) {
            if !v.pass && v.guaranteed {
                return Err(ProfitError::Adequacy { participant: v.participant, margin: v.margin });
            }
        }
        Ok(())
    }

    pub fn verdicts(&self, sol: &CcoSolution, tol: f64) -> Vec<Verdict> {
        let case = &sol.case;
        let mut out = vec![Verdict::new(Scheme::Cco, "operator", self.operator.expected, tol, true)];
        for v in &case.vres {
            let n = case.bus_index(&v.bus).expect("validated");
            out.push(Verdict::new(Scheme::Cco, &format!("W{}", v.bus), self.vres[n].expected, tol, true));
        }
        for (g, p) in case.generators.iter().zip(&self.generators) {
            out.push(Verdict::new(Scheme::Cco, &g.id, p.expected, tol, true));
        }
        for (l, p) in case.loads.iter().zip(&self.loads) {
            out.push(Verdict::new(Scheme::Cco, &l.id, p.expected, tol, false));
        }
        out
    }

    /// Participant rows in table order: operator, generators, renewables, loads.
    pub fn rows(&self, sol: &CcoSolution) -> Vec<(String, Profit)> {
        let case = &sol.case;
        let mut rows = vec![("Operator".to_string(), Profit { expected: self.operator.expected, std: self.operator.std })];
        for (g, p) in case.generators.iter().zip(&self.generators) {
            rows.push((g.id.clone(), Profit { expected: p.expected, std: p.std }));
        }
        for v in &case.vres {
            let n = case.bus_index(&v.bus).expect("validated");
            rows.push((format!("W{}", v.bus), self.vres[n]));
        }
        for (l, p) in case.loads.iter().zip(&self.loads) {
            rows.push((l.id.clone(), *p));
        }
        rows
    }
}

/// Second-stage cash-flow building blocks, `[scenario][element]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoIntermediates {
    /// Net real-time balancing quantity per bus.
    pub imbalance: Vec<Vec<f64>>,
    /// Renewable real-time cash flow per bus.
    pub vres_flow: Vec<Vec<f64>>,
    /// Generator real-time cash flow per generator.
    pub generator_flow: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoProfitReport {
    pub operator: Profit,
    pub vres: Vec<Profit>,
    pub generators: Vec<Profit>,
    pub loads: Vec<Profit>,
    /// Kept only up to [`INTERMEDIATE_LIMIT`] scenarios.
    pub intermediates: Option<SoIntermediates>,
}

pub fn so_profits(sol: &SoSolution, prices: &SoPriceSchedule) -> SoProfitReport {
    let case = &sol.case;
    let sc = &sol.scenarios;
    let prob = &sc.probability;
    let nb = case.buses.len();
    let gbus: Vec<usize> = (0..case.generators.len()).map(|i| case.generator_bus(i)).collect();
    let lbus: Vec<usize> = (0..case.loads.len()).map(|j| case.load_bus(j)).collect();
    let lambda = &sol.balance_dual;

    let mut imbalance = Vec::with_capacity(sc.len());
    let mut vres_flow = Vec::with_capacity(sc.len());
    let mut generator_flow = Vec::with_capacity(sc.len());
    let mut operator_flow = Vec::with_capacity(sc.len());
    for (w, out) in sc.output.iter().enumerate() {
        let price = &prices.realtime[w];
        let a: Vec<f64> = (0..nb)
            .map(|n| {
                let mut v = -(sol.vres_spill[w][n] + sol.vres_sched[n] - out[n]);
                for i in (0..gbus.len()).filter(|&i| gbus[i] == n) {
                    v += sol.reserve_up[w][i] - sol.reserve_down[w][i];
                }
                for j in (0..lbus.len()).filter(|&j| lbus[j] == n) {
                    v += sol.curtail[w][j];
                }
                v
            })
            .collect();
        let b: Vec<f64> = (0..nb)
            .map(|n| {
                let produced = out[n] - sol.vres_spill[w][n];
                price[n] * (produced - sol.vres_sched[n]) - case.vres_at(n).cost * produced
            })
            .collect();
        let d: Vec<f64> = case
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let pr = price[gbus[i]];
                (pr - g.up_cost) * sol.reserve_up[w][i] - (pr - g.down_saving) * sol.reserve_down[w][i]
            })
            .collect();
        operator_flow.push(-(0..nb).map(|n| price[n] * a[n]).sum::<f64>());
        imbalance.push(a);
        vres_flow.push(b);
        generator_flow.push(d);
    }

    let scheduled_income: f64 = (0..nb)
        .map(|n| {
            let gen: f64 = (0..gbus.len()).filter(|&i| gbus[i] == n).map(|i| sol.dispatch[i]).sum();
            let demand: f64 = (0..lbus.len()).filter(|&j| lbus[j] == n).map(|j| case.loads[j].demand).sum();
            -lambda[n] * (gen + sol.vres_sched[n] - demand)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let (op_mean, op_std) = weighted_moments(prob, operator_flow.iter().copied());
    let operator = Profit { expected: scheduled_income + op_mean, std: op_std };

    let vres = (0..nb)
        .map(|n| {
            let (m, s) = weighted_moments(prob, vres_flow.iter().map(|r| r[n]));
            Profit { expected: lambda[n] * sol.vres_sched[n] + m, std: s }
        })
        .collect();
    let generators = case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let (m, s) = weighted_moments(prob, generator_flow.iter().map(|r| r[i]));
            Profit { expected: (lambda[gbus[i]] - g.cost) * sol.dispatch[i] + m, std: s }
        })
        .collect();
    let loads = case
        .loads
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let n = lbus[j];
            let (m, s) = weighted_moments(prob, (0..sc.len()).map(|w| prices.realtime[w][n] * sol.curtail[w][j]));
            Profit { expected: m - lambda[n] * l.demand, std: s }
        })
        .collect();
    let intermediates =
        (sc.len() <= INTERMEDIATE_LIMIT).then_some(SoIntermediates { imbalance, vres_flow, generator_flow });
    SoProfitReport { operator, vres, generators, loads, intermediates }
}

impl SoProfitReport {
    pub fn verdicts(&self, sol: &SoSolution, tol: f64) -> Vec<Verdict> {
        let case = &sol.case;
        let mut out = vec![Verdict::new(Scheme::So, "operator", self.operator.expected, tol, true)];
        for v in &case.vres {
            let n = case.bus_index(&v.bus).expect("validated");
            out.push(Verdict::new(Scheme::So, &format!("W{}", v.bus), self.vres[n].expected, tol, true));
        }
        for (g, p) in case.generators.iter().zip(&self.generators) {
            out.push(Verdict::new(Scheme::So, &g.id, p.expected, tol, true));
        }
        for (l, p) in case.loads.iter().zip(&self.loads) {
            out.push(Verdict::new(Scheme::So, &l.id, p.expected, tol, false));
        }
        out
    }

    pub fn verify(&self, sol: &SoSolution, tol: f64) -> Result<(), ProfitError> {
        for v in self.verdicts(sol, tol) {
            if !v.pass && v.guaranteed {
                return Err(ProfitError::Adequacy { participant: v.participant, margin: v.margin });
            }
        }
        Ok(())
    }

    pub fn rows(&self, sol: &SoSolution) -> Vec<(String, Profit)> {
        let case = &sol.case;
        let mut rows = vec![("Operator".to_string(), self.operator)];
        for (g, p) in case.generators.iter().zip(&self.generators) {
            rows.push((g.id.clone(), *p));
        }
        for v in &case.vres {
            let n = case.bus_index(&v.bus).expect("validated");
            rows.push((format!("W{}", v.bus), self.vres[n]));
        }
        for (l, p) in case.loads.iter().zip(&self.loads) {
            rows.push((l.id.clone(), *p));
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Cco,
    So,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Cco => "cco",
            Scheme::So => "so",
        })
    }
}

/// Adequacy outcome for one participant. Loads carry no guarantee and are
/// reported for completeness.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub scheme: Scheme,
    pub participant: String,
    pub margin: f64,
    pub guaranteed: bool,
    pub pass: bool,
}

impl Verdict {
    fn new(scheme: Scheme, participant: &str, margin: f64, tol: f64, guaranteed: bool) -> Self {
        Self { scheme, participant: participant.to_string(), margin, guaranteed, pass: margin >= -tol }
    }
}

/// Verdict table across both schemes.
pub fn adequacy_report(
    cco: (&ProfitReport, &CcoSolution),
    so: Option<(&SoProfitReport, &SoSolution)>,
    tol: f64,
) -> Vec<Verdict> {
    let mut out = cco.0.verdicts(cco.1, tol);
    if let Some((report, sol)) = so {
        out.extend(report.verdicts(sol, tol));
    }
    out
}

/// Writes `participant,expected,std` rows rounded to `digits` decimals.
pub fn write_profit_csv<W: Write>(rows: &[(String, Profit)], digits: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant", "expected", "std"])?;
    for (who, p) in rows {
        w.write_record([who.as_str(), &fmt_fixed(p.expected, digits), &fmt_fixed(p.std, digits)])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-point rendering that never prints a negative zero.
pub fn fmt_fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}
