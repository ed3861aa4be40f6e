mod common;

use std::time::Instant;

use ccmkt::clearing::{
    build_dcco, build_nominal, build_so, quantile, sample_scenarios, solve_cco, solve_so, ClearingError, QuantileSpec,
    ScenarioSet, SoModel,
};
use ccmkt::lp::{check_kkt, solve_lp, LpStatus, SolverOptions};
use ccmkt::netmodel::{DistributionFamily, Generator, Load, MarketCase};
use ccmkt::pricing::so_prices;
use ccmkt::profits::so_profits;
use common::{assert_all_close, assert_close, case, feasible_cases, random_case};
use proptest::prelude::*;

/// Standard normal CDF by composite Simpson integration of the density.
fn normal_cdf(x: f64) -> f64 {
    let n = 4000;
    let h = x / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

fn bisect_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn single_bus(demand: f64) -> MarketCase {
    MarketCase::from_parts(MarketCase {
        buses: vec!["1".into()],
        lines: vec![],
        generators: vec![Generator {
            id: "G".into(),
            bus: "1".into(),
            cost: 10.0,
            up_cost: 10.0,
            down_saving: 10.0,
            capacity: 5.0,
            up_reserve_cap: 5.0,
            down_reserve_cap: 5.0,
        }],
        vres: vec![],
        loads: vec![Load { id: "L".into(), bus: "1".into(), demand, curtailment_cost: 1000.0 }],
        epsilon: 0.05,
        reference_bus: "1".into(),
        distribution: DistributionFamily::normal(),
    })
    .unwrap()
}

fn without_uncertainty(mut c: MarketCase) -> MarketCase {
    c.vres.iter_mut().for_each(|v| v.sigma = 0.0);
    c
}

#[test]
fn normal_quantile_matches_integrated_density() {
    let oracle = bisect_quantile(0.975);
    assert_close(oracle, 1.959964, 5e-7);
    let q = quantile(&DistributionFamily::normal(), 0.975).unwrap();
    assert_close(q, oracle, 1e-10);
    for p in [0.6, 0.8, 0.9, 0.99, 0.999] {
        assert_close(quantile(&DistributionFamily::normal(), p).unwrap(), bisect_quantile(p), 1e-9);
    }
}

#[test]
fn uniform_quantile_at_looser_tolerance() {
    let q = QuantileSpec::new(&DistributionFamily::uniform(), 0.025).unwrap();
    assert_close(q.value, 3f64.sqrt() * (1.0 - 0.05), 1e-15);
    assert_close(q.value, 1.645448, 5e-7);
}

#[test]
fn single_bus_nominal_dispatch() {
    let c = single_bus(3.0);
    let m = build_nominal(&c, &[0.0]).unwrap();
    let s = solve_lp(&m.lp, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert_close(s.value(m.index.dispatch[0]), 3.0, 1e-12);
    assert_close(s.objective, 30.0, 1e-12);
}

#[test]
fn nominal_dimensions_follow_structure() {
    let c = case("case1");
    let w: Vec<f64> = (0..3).map(|n| c.vres_at(n).forecast).collect();
    let m = build_nominal(&c, &w).unwrap();
    // 3·4 + 4·3 + 2 columns; 5·4 + 4·3 + 2 + 4·3 + 2 rows
    assert_eq!(NominalDims::of(&m), (26, 48));
    assert_eq!(ccmkt::clearing::NominalModel::expected_dims(&c), (26, 48));
    let s = solve_lp(&m.lp, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
}

struct NominalDims;
impl NominalDims {
    fn of(m: &ccmkt::clearing::NominalModel) -> (usize, usize) {
        (m.lp.num_vars(), m.lp.num_rows())
    }
}

#[test]
fn surplus_renewable_output_is_spilled() {
    let c = case("case1");
    let w = [0.0, 5000.0, 80.0];
    let m = build_nominal(&c, &w).unwrap();
    let s = solve_lp(&m.lp, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(s.value(m.index.vres_spill[1]) > 4000.0);
    assert!(check_kkt(&m.lp, &s, 1e-7).passes());
    for r in m.index.rebalance.iter().chain(&m.index.balance) {
        assert_close(m.lp.row_activity(*r, &s.x), m.lp.rows()[r.0].rhs, 1e-8);
    }
}

#[test]
fn case_one_column_count() {
    let c = case("case1");
    let m = build_dcco(&c).unwrap();
    assert_eq!(m.lp.num_vars(), 5 * 4 + 5 * 3 + 2 * 2);
    assert_eq!(m.lp.num_vars(), 39);
}

#[test]
fn certain_case_equals_nominal_at_forecast() {
    for name in ["case1", "case2", "case3"] {
        let c = without_uncertainty(case(name));
        let cco = solve_cco(&c).unwrap();
        let w: Vec<f64> = (0..c.buses.len()).map(|n| c.vres_at(n).forecast).collect();
        let m = build_nominal(&c, &w).unwrap();
        let s = solve_lp(&m.lp, &SolverOptions::default()).unwrap();
        assert_close(cco.objective, s.objective, 1e-7);
    }
}

#[test]
fn quantile_terms_vanish_near_half() {
    let mut c = case("case1");
    c.epsilon = 0.5 - 1e-12;
    let m = build_dcco(&c).unwrap();
    assert!(m.bus_quantile.iter().all(|q| *q >= 0.0 && *q < 1e-10));
    assert!(m.gen_spread.iter().all(|s| *s < 1e-8));
}

#[test]
fn case_one_schedule_and_reserves() {
    let sol = solve_cco(&case("case1")).unwrap();
    assert_all_close(&sol.dispatch, &[100.0, 35.54, 9.96, 10.0], 0.005);
    assert_all_close(&sol.vres_sched[1..], &[34.5, 80.0], 0.005);
    assert_all_close(&sol.reserve_up, &[0.0, 2.04, 22.96, 5.0], 0.005);
    assert_all_close(&sol.reserve_down, &[0.0, 10.0, 15.0, 5.0], 0.005);
}

#[test]
fn zero_demand_violates_an_assumption() {
    let mut c = case("case1");
    c.loads.iter_mut().for_each(|l| l.demand = 0.0);
    assert!(matches!(solve_cco(&c), Err(ClearingError::Assumption(_))));
}

#[test]
fn certain_case_scenarios_equal_forecast() {
    let c = without_uncertainty(case("case1"));
    let s = sample_scenarios(&c, 20, 3);
    for row in &s.output {
        assert_eq!(row, &vec![0.0, 34.5, 80.0]);
    }
}

#[test]
fn sample_moments_follow_the_forecast_errors() {
    let c = case("case1");
    let s = sample_scenarios(&c, 1000, 11);
    for n in 1..3 {
        let v = c.vres_at(n);
        let xs: Vec<f64> = s.output.iter().map(|r| r[n]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        assert!((mean - v.forecast).abs() <= 3.0 * v.sigma / 1000f64.sqrt(), "bus {n}: mean {mean}");
        assert!((std / v.sigma - 1.0).abs() <= 0.1, "bus {n}: std {std}");
    }
    assert_eq!(s, sample_scenarios(&c, 1000, 11));
    assert_ne!(s.output, sample_scenarios(&c, 1000, 12).output);
}

#[test]
fn scenario_model_column_count() {
    let c = case("case1");
    let s = sample_scenarios(&c, 1000, 1);
    let m = build_so(&c, &s).unwrap();
    assert_eq!(m.lp.num_vars(), 4 + 6 + 1000 * (8 + 6 + 2));
    assert_eq!(m.lp.num_vars(), 16010);
    assert_eq!(SoModel::expected_columns(&c, 1000), 16010);
}

#[test]
fn single_forecast_scenario_keeps_operator_whole() {
    let c = case("case1");
    let w: Vec<f64> = (0..3).map(|n| c.vres_at(n).forecast).collect();
    let set = ScenarioSet::single(&c, w);
    let sol = solve_so(&c, &set).unwrap();
    let prices = so_prices(&sol);
    let report = so_profits(&sol, &prices);
    assert!(report.operator.expected >= -1e-6);
    assert!(report.verify(&sol, 1e-6).is_ok());
    let model = build_so(&c, &set).unwrap();
    let k = check_kkt(&model.lp, &sol.lp, 1e-9);
    assert_eq!(k.duality_gap, k.duality_gap.min(1e-12), "{k:?}");
}

#[test]
fn single_scenario_price_is_marginal_rebalance_cost() {
    let c = case("case1");
    let w: Vec<f64> = (0..3).map(|n| c.vres_at(n).forecast).collect();
    let set = ScenarioSet::single(&c, w);
    let model = build_so(&c, &set).unwrap();
    let sol = solve_so(&c, &set).unwrap();
    let prices = so_prices(&sol);
    const STEP: f64 = 1e-4;
    for n in 0..3 {
        let row = model.index.rebalance[0][n];
        let rhs = model.lp.rows()[row.0].rhs;
        let mut up = model.lp.clone();
        up.set_rhs(row, rhs + STEP);
        let mut down = model.lp.clone();
        down.set_rhs(row, rhs - STEP);
        let fu = solve_lp(&up, &SolverOptions::default()).unwrap().objective;
        let fd = solve_lp(&down, &SolverOptions::default()).unwrap().objective;
        let (right, left) = ((fu - sol.objective) / STEP, (sol.objective - fd) / STEP);
        let p = prices.realtime[0][n];
        assert!(p >= left - 1e-6 && p <= right + 1e-6, "bus {n}: {p} outside [{left}, {right}]");
    }
}

#[test]
fn scenario_solve_is_slower_than_chance_constrained() {
    let c = case("case1");
    let t = Instant::now();
    solve_cco(&c).unwrap();
    let cco = t.elapsed();
    let s = sample_scenarios(&c, 300, 1);
    let t = Instant::now();
    let sol = solve_so(&c, &s).unwrap();
    let so = t.elapsed();
    assert!(so > cco, "{so:?} vs {cco:?}");
    assert!(sol.max_rebalance_residual <= 1e-7);
}

#[test]
fn tighter_tolerance_never_lowers_cost() {
    let mut last = f64::NEG_INFINITY;
    for eps in [0.2, 0.1, 0.05, 0.025, 0.01] {
        let mut c = case("case1");
        c.epsilon = eps;
        let obj = solve_cco(&c).unwrap().objective;
        assert!(obj >= last - 1e-9, "epsilon {eps}: {obj} < {last}");
        last = obj;
    }
}

#[test]
fn vanishing_spread_approaches_nominal_cost() {
    let base = case("case1");
    let w: Vec<f64> = (0..3).map(|n| base.vres_at(n).forecast).collect();
    let nominal = solve_lp(&build_nominal(&base, &w).unwrap().lp, &SolverOptions::default()).unwrap().objective;
    let mut gaps = Vec::new();
    for scale in [1.0, 0.1, 0.01, 0.001] {
        let mut c = base.clone();
        c.vres.iter_mut().for_each(|v| v.sigma *= scale);
        gaps.push((solve_cco(&c).unwrap().objective - nominal).abs());
    }
    assert!(gaps.windows(2).all(|g| g[1] <= g[0] + 1e-9), "{gaps:?}");
    assert!(gaps[3] < 0.5, "{gaps:?}");
}

/// Chance-constraint certificate and control budget, computed from the
/// solution fields with an independently evaluated quantile.
fn check_certificate(c: &MarketCase, sol: &ccmkt::clearing::CcoSolution) {
    const TOL: f64 = 1e-7;
    let spread: Vec<f64> = (0..c.buses.len())
        .map(|n| quantile(c.distribution_at(n), 1.0 - c.epsilon).unwrap() * c.vres_at(n).sigma)
        .collect();
    for (i, g) in c.generators.iter().enumerate() {
        let s = spread[c.generator_bus(i)];
        let (ru, rd, au, ad, p) = (sol.reserve_up[i], sol.reserve_down[i], sol.up_share[i], sol.down_share[i], sol.dispatch[i]);
        assert!(ru - au * s >= -TOL && ru + au * s <= g.up_reserve_cap + TOL, "{} up", g.id);
        assert!(rd - ad * s >= -TOL && rd + ad * s <= g.down_reserve_cap + TOL, "{} down", g.id);
        let out = p + ru - rd;
        assert!(out - (au + ad) * s >= -TOL && out + (au + ad) * s <= g.capacity + TOL, "{} output", g.id);
    }
    for n in 0..c.buses.len() {
        let (w, b) = (sol.vres_spill[n], sol.spill_share[n]);
        assert!(w - b * spread[n] >= -TOL, "bus {n} spill floor");
        assert!(w + (1.0 - b) * spread[n] <= c.vres_at(n).forecast + TOL, "bus {n} spill ceiling");
        if c.vres_at(n).sigma > 0.0 {
            let budget: f64 = (0..c.generators.len())
                .filter(|&i| c.generator_bus(i) == n)
                .map(|i| sol.up_share[i] + sol.down_share[i])
                .chain((0..c.loads.len()).filter(|&j| c.load_bus(j) == n).map(|j| sol.curtail_share[j]))
                .sum::<f64>()
                + b;
            assert!((budget - 1.0).abs() <= 1e-8, "bus {n} budget {budget}");
        }
    }
    for (j, l) in c.loads.iter().enumerate() {
        let s = spread[c.load_bus(j)];
        assert!(sol.curtail[j] - sol.curtail_share[j] * s >= -TOL && sol.curtail[j] + sol.curtail_share[j] * s <= l.demand + TOL);
    }
}

#[test]
fn bundled_cases_satisfy_the_certificate() {
    for name in ["case1", "case2", "case3", "case4"] {
        let c = case(name);
        check_certificate(&c, &solve_cco(&c).unwrap());
    }
}

#[test]
fn random_cases_satisfy_the_certificate() {
    for (_, c, sol) in feasible_cases(50, 1000) {
        check_certificate(&c, &sol);
        assert!(check_kkt(&sol.model.lp, &sol.lp, 1e-7).passes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenario_rebalance_rows_hold(seed in any::<u64>(), count in 1usize..=20) {
        let c = random_case(seed);
        let set = sample_scenarios(&c, count, seed);
        let sol = match solve_so(&c, &set) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        prop_assert!(sol.max_rebalance_residual <= 1e-7);
    }

    #[test]
    fn tolerance_monotonicity_on_random_cases(seed in any::<u64>()) {
        let base = random_case(seed);
        let mut last = f64::NEG_INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025, 0.01] {
            let mut c = base.clone();
            c.epsilon = eps;
            match solve_cco(&c) {
                Ok(s) => {
                    prop_assert!(s.objective >= last - 1e-7 * (1.0 + last.abs()));
                    last = s.objective;
                }
                // once infeasible, tighter tolerances stay infeasible
                Err(_) => last = f64::INFINITY,
            }
        }
    }
}
