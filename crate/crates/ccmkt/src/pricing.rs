//! Price schedules built from clearing duals: uncertainty-uniform prices for
//! the chance-constrained clearing and per-scenario prices for the
//! scenario-based clearing.

use std::io::Write;

use crate::clearing::{CcoSolution, SoSolution, ASSUMPTION_TOL};

/// Margins below this count as a tie between the two reserve-adder branches.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("served demand {0:.3e} is not positive; the load adder is undefined")]
    NoServedDemand(f64),
}

/// Which expression produced a reserve adder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdderBranch {
    /// Control multiplier divided by the quantile spread.
    Control,
    /// Multiplier of the reserve lower-bound row.
    ReserveFloor,
    /// Both branches agree within [`TIE_TOL`]; the control form was returned.
    Tie,
    /// The bus carries no uncertainty, so the floor multiplier is used directly.
    Certain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveAdder {
    pub up: f64,
    pub down: f64,
    pub up_branch: AdderBranch,
    pub down_branch: AdderBranch,
}

fn adder(control: f64, spread: f64, floor_dual: f64) -> (f64, AdderBranch) {
    if spread <= 0.0 {
        return (floor_dual, AdderBranch::Certain);
    }
    let margin = control - spread * floor_dual;
    if margin.abs() <= TIE_TOL * (1.0 + control.abs()) {
        (control / spread, AdderBranch::Tie)
    } else if margin > 0.0 {
        (control / spread, AdderBranch::Control)
    } else {
        (floor_dual, AdderBranch::ReserveFloor)
    }
}

/// Upward and downward reserve adders per generator.
pub fn compute_tau(sol: &CcoSolution) -> Vec<ReserveAdder> {
    (0..sol.case.generators.len())
        .map(|i| {
            let n = sol.generator_bus(i);
            let (kappa, sp) = (sol.control_dual[n], sol.gen_spread[i]);
            let (up, up_branch) = adder(kappa, sp, sol.up_floor_dual[i]);
            let (down, down_branch) = adder(kappa, sp, sol.down_floor_dual[i]);
            ReserveAdder { up, down, up_branch, down_branch }
        })
        .collect()
}

/// Uniform load-price adder that leaves the operator's adder income at zero.
pub fn compute_zeta(sol: &CcoSolution, tau: &[ReserveAdder]) -> Result<f64, PricingError> {
    let served = sol.served_demand();
    if served <= ASSUMPTION_TOL {
        return Err(PricingError::NoServedDemand(served));
    }
    let mut num = 0.0;
    for (i, t) in tau.iter().enumerate() {
        num += t.up * sol.reserve_up[i] + t.down * sol.reserve_down[i];
    }
    for n in 0..sol.case.buses.len() {
        let spill_margin = sol.spill_floor_dual[n] - sol.spill_ceiling_dual[n];
        num -= spill_margin * (sol.case.vres_at(n).forecast - sol.vres_spill[n]);
    }
    Ok(num / served)
}

/// Chance-constrained price schedule. Bus vectors follow `case.buses`,
/// generator vectors follow `case.generators`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSchedule {
    pub energy: Vec<f64>,
    pub vres_schedule: Vec<f64>,
    pub load_schedule: Vec<f64>,
    pub rebalance: Vec<f64>,
    pub vres_deviation: Vec<f64>,
    pub curtailment: Vec<f64>,
    pub generator_energy: Vec<f64>,
    pub generator_up: Vec<f64>,
    pub generator_down: Vec<f64>,
    pub tau: Vec<ReserveAdder>,
    pub zeta: f64,
}

impl PriceSchedule {
    /// Generators whose adder branches tied.
    pub fn ties(&self) -> Vec<usize> {
        self.tau
            .iter()
            .enumerate()
            .filter(|(_, t)| t.up_branch == AdderBranch::Tie || t.down_branch == AdderBranch::Tie)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn cco_prices(sol: &CcoSolution) -> Result<PriceSchedule, PricingError> {
    let tau = compute_tau(sol);
    let zeta = compute_zeta(sol, &tau)?;
    let nb = sol.case.buses.len();
    let spill: Vec<f64> = (0..nb).map(|n| sol.spill_floor_dual[n] - sol.spill_ceiling_dual[n]).collect();
    let lambda = &sol.balance_dual;
    let nu = &sol.rebalance_dual;
    let gbus: Vec<usize> = (0..sol.case.generators.len()).map(|i| sol.generator_bus(i)).collect();
    Ok(PriceSchedule {
        energy: lambda.clone(),
        vres_schedule: (0..nb).map(|n| lambda[n] - spill[n]).collect(),
        load_schedule: lambda.iter().map(|l| l + zeta).collect(),
        rebalance: nu.clone(),
        vres_deviation: (0..nb).map(|n| nu[n] - spill[n]).collect(),
        curtailment: nu.iter().map(|v| v + zeta).collect(),
        generator_energy: gbus.iter().map(|&n| lambda[n]).collect(),
        generator_up: gbus.iter().zip(&tau).map(|(&n, t)| nu[n] + t.up).collect(),
        generator_down: gbus.iter().zip(&tau).map(|(&n, t)| nu[n] - t.down).collect(),
        tau,
        zeta,
    })
}

/// Probability-weighted mean and standard deviation.
pub fn weighted_moments(prob: &[f64], values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (p, v) in prob.iter().zip(values) {
        m1 += p * v;
        m2 += p * v * v;
    }
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}

/// Scenario-based price schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SoPriceSchedule {
    pub energy: Vec<f64>,
    /// Real-time price `[scenario][bus]`.
    pub realtime: Vec<Vec<f64>>,
    pub realtime_mean: Vec<f64>,
    pub realtime_std: Vec<f64>,
}

pub fn so_prices(sol: &SoSolution) -> SoPriceSchedule {
    let prob = &sol.scenarios.probability;
    let realtime: Vec<Vec<f64>> =
        sol.rebalance_dual.iter().zip(prob).map(|(row, p)| row.iter().map(|v| v / p).collect()).collect();
    let nb = sol.case.buses.len();
    let (mut mean, mut std) = (Vec::with_capacity(nb), Vec::with_capacity(nb));
    for n in 0..nb {
        let (m, s) = weighted_moments(prob, realtime.iter().map(|r| r[n]));
        mean.push(m);
        std.push(s);
    }
    SoPriceSchedule { energy: sol.balance_dual.clone(), realtime, realtime_mean: mean, realtime_std: std }
}

/// Writes one row per priced action: participant, action, bus, price.
pub fn write_price_csv<W: Write>(sol: &CcoSolution, prices: &PriceSchedule, out: W) -> csv::Result<()> {
    let case = &sol.case;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant", "action", "bus", "price"])?;
    let mut row = |who: &str, what: &str, bus: &str, v: f64| w.write_record([who, what, bus, &v.to_string()]);
    for (i, g) in case.generators.iter().enumerate() {
        row(&g.id, "energy", &g.bus, prices.generator_energy[i])?;
        row(&g.id, "reserve_up", &g.bus, prices.generator_up[i])?;
        row(&g.id, "reserve_down", &g.bus, prices.generator_down[i])?;
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).expect("validated");
        row(&format!("W{}", v.bus), "schedule", &v.bus, prices.vres_schedule[n])?;
        row(&format!("W{}", v.bus), "spill", &v.bus, prices.vres_deviation[n])?;
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = sol.load_bus(j);
        row(&l.id, "consumption", &l.bus, prices.load_schedule[n])?;
        row(&l.id, "curtailment", &l.bus, prices.curtailment[n])?;
    }
    w.flush()?;
    Ok(())
}
