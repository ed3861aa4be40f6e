mod common;

use ccmkt::clearing::{sample_scenarios, solve_cco, solve_so, CcoSolution, ScenarioSet};
use ccmkt::pricing::{cco_prices, compute_tau, compute_zeta, so_prices, AdderBranch, PricingError};
use ccmkt::profits::cco_operator_profit;
use common::{assert_all_close, assert_close, case, feasible_cases};

const TABLE: f64 = 0.005;

fn bus(sol: &CcoSolution, name: &str) -> usize {
    sol.case.bus_index(name).unwrap()
}

#[test]
fn case_one_reserve_adders() {
    let sol = solve_cco(&case("case1")).unwrap();
    let tau = compute_tau(&sol);
    assert_close(tau[2].up, 5.0, 1e-6);
    assert_close(tau[1].up, 0.0, 1e-6);
    assert_eq!(tau[0].up_branch, AdderBranch::Certain);
    let p = cco_prices(&sol).unwrap();
    let n = sol.generator_bus(0);
    assert_close(p.generator_up[0], p.rebalance[n] + sol.up_floor_dual[0], 1e-12);
    assert_close(p.generator_up[0], 25.0, TABLE);
}

#[test]
fn zero_multipliers_give_zero_adder() {
    let mut sol = solve_cco(&case("case1")).unwrap();
    sol.control_dual.iter_mut().for_each(|k| *k = 0.0);
    sol.up_floor_dual.iter_mut().for_each(|y| *y = 0.0);
    sol.down_floor_dual.iter_mut().for_each(|y| *y = 0.0);
    for t in compute_tau(&sol) {
        assert_eq!((t.up, t.down), (0.0, 0.0));
    }
    sol.spill_floor_dual.iter_mut().for_each(|y| *y = 0.0);
    sol.spill_ceiling_dual.iter_mut().for_each(|y| *y = 0.0);
    let tau = compute_tau(&sol);
    assert_eq!(compute_zeta(&sol, &tau).unwrap(), 0.0);
}

#[test]
fn case_one_load_adder() {
    let sol = solve_cco(&case("case1")).unwrap();
    let p = cco_prices(&sol).unwrap();
    assert_close(p.zeta, -9.71, TABLE);
    assert_all_close(&p.load_schedule, &[15.29; 3], TABLE);
}

#[test]
fn case_two_curtailment_price() {
    let sol = solve_cco(&case("case2")).unwrap();
    let p = cco_prices(&sol).unwrap();
    for name in ["2", "3"] {
        assert_close(p.curtailment[bus(&sol, name)], 16.97, TABLE);
    }
    assert_all_close(&p.generator_up, &[24.25, 48.5, 48.5, 48.5], TABLE);
}

#[test]
fn case_one_schedule_and_realtime_prices() {
    let sol = solve_cco(&case("case1")).unwrap();
    let p = cco_prices(&sol).unwrap();
    assert_all_close(&p.generator_energy, &[25.0; 4], TABLE);
    for v in &sol.case.vres {
        assert_close(p.vres_schedule[bus(&sol, &v.bus)], 0.0, TABLE);
    }
    assert_all_close(&p.generator_up, &[25.0, 25.0, 30.0, 30.0], TABLE);
    assert_all_close(&p.generator_down, &[25.0, 25.0, 20.0, 20.0], TABLE);
}

#[test]
fn case_three_upward_prices() {
    let p = cco_prices(&solve_cco(&case("case3")).unwrap()).unwrap();
    assert_all_close(&p.generator_up, &[25.0, 26.25, 31.5, 31.5], TABLE);
}

#[test]
fn served_demand_must_be_positive() {
    let mut sol = solve_cco(&case("case1")).unwrap();
    sol.curtail = sol.case.loads.iter().map(|l| l.demand).collect();
    let tau = compute_tau(&sol);
    assert!(matches!(compute_zeta(&sol, &tau), Err(PricingError::NoServedDemand(_))));
}

#[test]
fn single_scenario_has_no_spread() {
    let c = case("case1");
    let set = sample_scenarios(&c, 1, 5);
    let p = so_prices(&solve_so(&c, &set).unwrap());
    assert_eq!(p.realtime.len(), 1);
    assert!(p.realtime_std.iter().all(|s| *s == 0.0));
}

#[test]
fn case_four_hits_the_curtailment_value() {
    let c = case("case4");
    let set = sample_scenarios(&c, 1000, 1);
    let p = so_prices(&solve_so(&c, &set).unwrap());
    assert_eq!(p.realtime.len(), 1000);
    assert!(p.realtime.iter().flatten().any(|v| (v - 48.5).abs() < 1e-6));
}

#[test]
fn case_one_scenario_price_moments() {
    let c = case("case1");
    let p = so_prices(&solve_so(&c, &sample_scenarios(&c, 1000, 7)).unwrap());
    for n in 0..3 {
        assert!((p.realtime_mean[n] - 25.57).abs() <= 0.5, "{:?}", p.realtime_mean);
        assert!((p.realtime_std[n] - 2.01).abs() <= 1.0, "{:?}", p.realtime_std);
    }
}

#[test]
fn scenario_prices_are_locationally_uniform() {
    // all real-time actions at one bus settle at the rebalance dual of that bus
    let c = case("case2");
    let set: ScenarioSet = sample_scenarios(&c, 50, 3);
    let sol = solve_so(&c, &set).unwrap();
    let p = so_prices(&sol);
    for (w, row) in p.realtime.iter().enumerate() {
        assert_eq!(row.len(), 3);
        for n in 0..3 {
            assert_close(row[n] * set.probability[w], sol.rebalance_dual[w][n], 1e-12);
        }
    }
}

#[test]
fn adder_branches_are_consistent() {
    for (seed, _, sol) in feasible_cases(60, 2000) {
        for (i, t) in compute_tau(&sol).iter().enumerate() {
            let (k, sp) = (sol.control_dual[sol.generator_bus(i)], sol.gen_spread[i]);
            for (value, branch, floor) in
                [(t.up, t.up_branch, sol.up_floor_dual[i]), (t.down, t.down_branch, sol.down_floor_dual[i])]
            {
                match branch {
                    AdderBranch::Control => {
                        assert!(k - sp * floor >= 0.0, "seed {seed}");
                        assert_close(value, k / sp, 1e-12);
                    }
                    AdderBranch::Tie => assert_close(value, floor, 1e-6),
                    AdderBranch::ReserveFloor => {
                        assert!(k - sp * floor < 0.0, "seed {seed}");
                        assert_eq!(value, floor);
                    }
                    AdderBranch::Certain => {
                        assert_eq!(sp, 0.0);
                        assert_eq!(value, floor);
                    }
                }
            }
        }
    }
}

#[test]
fn load_adder_cancels_operator_adder_income() {
    for name in ["case1", "case2", "case3", "case4"] {
        let sol = solve_cco(&case(name)).unwrap();
        let op = cco_operator_profit(&sol, &cco_prices(&sol).unwrap());
        assert!(op.adder_part.abs() <= 1e-6, "{name}: {}", op.adder_part);
    }
    for (seed, _, sol) in feasible_cases(60, 3000) {
        let op = cco_operator_profit(&sol, &cco_prices(&sol).unwrap());
        assert!(op.adder_part.abs() <= 1e-6, "seed {seed}: {}", op.adder_part);
    }
}
