mod common;

use ccmkt::clearing::{sample_scenarios, solve_cco, solve_so, CcoSolution};
use ccmkt::netmodel::Generator;
use ccmkt::pricing::{cco_prices, so_prices};
use ccmkt::profits::{adequacy_report, cco_consumer_surplus, cco_profits, so_profits, ProfitError, ProfitReport, Scheme};
use common::{assert_close, case, feasible_cases, random_case};

const TABLE: f64 = 0.005;

fn report(sol: &CcoSolution) -> ProfitReport {
    cco_profits(sol, &cco_prices(sol).unwrap())
}

fn table(name: &str) -> Vec<(String, f64, f64)> {
    let sol = solve_cco(&case(name)).unwrap();
    report(&sol).rows(&sol).into_iter().map(|(who, p)| (who, p.expected, p.std)).collect()
}

#[track_caller]
fn assert_rows(name: &str, expected: &[(&str, f64, f64)]) {
    let rows = table(name);
    for (who, mean, std) in expected {
        let (_, m, s) = rows.iter().find(|r| r.0 == *who).unwrap_or_else(|| panic!("{name}: no row {who}"));
        assert!((m - mean).abs() <= TABLE, "{name} {who}: expected {m} vs {mean}");
        assert!((s - std).abs() <= TABLE, "{name} {who}: std {s} vs {std}");
    }
}

#[test]
fn case_one_profit_table() {
    assert_rows(
        "case1",
        &[
            ("Operator", 0.0, 303.03),
            ("G1", 500.0, 0.0),
            ("G2", 0.0, 0.0),
            ("G3", 100.22, 64.48),
            ("G4", 80.0, 12.9),
            ("W2", 0.0, 0.0),
            ("W3", 0.0, 0.0),
            ("L2", -1070.04, 0.0),
            ("L3", -3057.26, 0.0),
        ],
    );
}

#[test]
fn case_two_profit_table() {
    assert_rows(
        "case2",
        &[
            ("Operator", 0.0, 266.07),
            ("G1", 500.0, 0.0),
            ("G2", 242.5, 3.22),
            ("G3", 288.75, 37.08),
            ("G4", 166.25, 4.84),
            ("W2", 25.88, 0.0),
            ("W3", 60.0, 0.0),
            ("L2", -1156.16, 36.32),
            ("L3", -3544.71, 0.0),
        ],
    );
}

#[test]
fn case_three_profit_table() {
    assert_rows(
        "case3",
        &[
            ("Operator", 0.0, 345.67),
            ("G1", 500.0, 0.0),
            ("G2", 0.0, 0.0),
            ("G3", 0.0, 21.4),
            ("G4", 84.0, 12.9),
            ("L2", -1058.82, 0.0),
            ("L3", -3025.19, 0.0),
        ],
    );
}

#[test]
fn case_four_profits_are_adequate() {
    let sol = solve_cco(&case("case4")).unwrap();
    let r = report(&sol);
    assert!(r.verify(&sol, 1e-6).is_ok());
    assert!(adequacy_report((&r, &sol), None, 1e-6).iter().filter(|v| v.guaranteed).all(|v| v.pass));
    assert_close(r.operator.std, 266.07, TABLE);
    assert_close(r.generators[1].expected, 230.0, TABLE);
}

#[test]
fn uncongested_network_has_no_rent() {
    let mut c = case("case1");
    c.lines.iter_mut().for_each(|l| l.capacity = 1e6);
    let sol = solve_cco(&c).unwrap();
    let op = report(&sol).operator;
    assert!(op.congestion.abs() <= 1e-6, "{}", op.congestion);
    assert!(op.price_part.abs() <= 1e-6, "{}", op.price_part);
}

#[test]
fn bus_without_renewables_earns_nothing() {
    let sol = solve_cco(&case("case1")).unwrap();
    let n = sol.case.bus_index("1").unwrap();
    assert_eq!(sol.case.vres_at(n).forecast, 0.0);
    let r = report(&sol);
    assert_eq!((r.vres[n].expected, r.vres[n].std), (0.0, 0.0));
}

#[test]
fn idle_generator_earns_nothing() {
    let mut c = case("case1");
    c.generators.push(Generator {
        id: "G5".into(),
        bus: "1".into(),
        cost: 900.0,
        up_cost: 950.0,
        down_saving: 1.0,
        capacity: 50.0,
        up_reserve_cap: 10.0,
        down_reserve_cap: 10.0,
    });
    let sol = solve_cco(&c).unwrap();
    assert_eq!((sol.dispatch[4], sol.reserve_up[4], sol.reserve_down[4]), (0.0, 0.0, 0.0));
    let g = report(&sol).generators[4];
    assert_eq!(g.expected, 0.0);
}

#[test]
fn fully_curtailed_load_at_equal_prices_breaks_even() {
    let mut sol = solve_cco(&case("case1")).unwrap();
    let mut prices = cco_prices(&sol).unwrap();
    sol.curtail = sol.case.loads.iter().map(|l| l.demand).collect();
    prices.curtailment = prices.load_schedule.clone();
    for p in cco_consumer_surplus(&sol, &prices) {
        assert_close(p.expected, 0.0, 1e-9);
    }
}

#[test]
fn case_one_scenario_operator_breaks_even() {
    let c = case("case1");
    let sol = solve_so(&c, &sample_scenarios(&c, 1000, 1)).unwrap();
    let r = so_profits(&sol, &so_prices(&sol));
    assert!(r.operator.expected.abs() <= 1e-4, "{}", r.operator.expected);
    assert!(r.operator.std <= 1e-4, "{}", r.operator.std);
    assert!(r.verify(&sol, 1e-6).is_ok());
    let g1 = r.generators[0].expected;
    assert!((g1 - 557.4).abs() <= 20.0, "first generator {g1}");
}

#[test]
fn single_scenario_profits_have_no_spread() {
    let c = case("case2");
    let sol = solve_so(&c, &sample_scenarios(&c, 1, 9)).unwrap();
    let r = so_profits(&sol, &so_prices(&sol));
    for (_, p) in r.rows(&sol) {
        assert_eq!(p.std, 0.0);
    }
}

#[test]
fn case_one_verdicts_pass() {
    let c = case("case1");
    let sol = solve_cco(&c).unwrap();
    let r = report(&sol);
    let so = solve_so(&c, &sample_scenarios(&c, 200, 1)).unwrap();
    let sr = so_profits(&so, &so_prices(&so));
    let verdicts = adequacy_report((&r, &sol), Some((&sr, &so)), 1e-6);
    assert!(verdicts.iter().any(|v| v.scheme == Scheme::So));
    for v in verdicts.iter().filter(|v| v.guaranteed) {
        assert!(v.pass, "{v:?}");
    }
}

#[test]
fn perturbed_duals_fail_the_operator_verdict() {
    let mut sol = solve_cco(&case("case1")).unwrap();
    // bus 3 schedules more than it consumes, so a higher energy price costs the operator
    let n = sol.case.bus_index("3").unwrap();
    sol.balance_dual[n] += 1.0;
    let r = report(&sol);
    let v = &adequacy_report((&r, &sol), None, 1e-6)[0];
    assert_eq!(v.participant, "operator");
    assert!(!v.pass && v.margin < 0.0, "{v:?}");
    assert!(matches!(r.verify(&sol, 1e-6), Err(ProfitError::Identity(_) | ProfitError::Adequacy { .. })));
}

#[test]
fn adequacy_holds_on_random_cases() {
    for (seed, _, sol) in feasible_cases(60, 4000) {
        let prices = cco_prices(&sol).unwrap();
        let r = cco_profits(&sol, &prices);
        assert!(r.verify(&sol, 1e-6).is_ok(), "seed {seed}: {:?}", r.verify(&sol, 1e-6));
        assert!(r.operator.congestion <= 1e-6);
        assert!((r.operator.price_part + r.operator.congestion).abs() <= 1e-6);
        for (i, g) in r.generators.iter().enumerate() {
            // the adder income covers the value of the reserve rows
            let (k, sp) = (sol.control_dual[sol.generator_bus(i)], sol.gen_spread[i]);
            let (yu, yd) = (sol.up_floor_dual[i], sol.down_floor_dual[i]);
            let bound = (k - sp * yu) * sol.up_share[i]
                + yu * sol.reserve_up[i]
                + (k - sp * yd) * sol.down_share[i]
                + yd * sol.reserve_down[i];
            assert!(g.adder_part >= bound - 1e-6, "seed {seed} generator {i}: {} < {bound}", g.adder_part);
        }
    }
}

#[test]
fn scenario_adequacy_holds_on_random_cases() {
    let mut checked = 0;
    let mut seed = 5000;
    while checked < 50 {
        let c = random_case(seed);
        let count = 1 + (seed % 20) as usize;
        if let Ok(sol) = solve_so(&c, &sample_scenarios(&c, count, seed)) {
            let r = so_profits(&sol, &so_prices(&sol));
            assert!(r.verify(&sol, 1e-6).is_ok(), "seed {seed}: {:?}", r.verify(&sol, 1e-6));
            for (_, p) in r.rows(&sol) {
                assert!(p.std >= 0.0);
            }
            checked += 1;
        }
        seed += 1;
    }
}
