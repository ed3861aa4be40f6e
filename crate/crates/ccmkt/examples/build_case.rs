//! Builds a two-bus market in code, clears it, and checks cost recovery for
//! every participant.

use ccmkt::clearing::solve_cco;
use ccmkt::netmodel::{DistributionFamily, Generator, Line, Load, MarketCase, Vres};
use ccmkt::pricing::cco_prices;
use ccmkt::profits::{adequacy_report, cco_profits, ADEQUACY_TOL};

fn generator(id: &str, bus: &str, cost: f64, capacity: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        cost,
        up_cost: cost + 5.0,
        down_saving: cost - 5.0,
        capacity,
        up_reserve_cap: 20.0,
        down_reserve_cap: 20.0,
    }
}

fn main() {
    let case = MarketCase::from_parts(MarketCase {
        buses: vec!["north".into(), "south".into()],
        lines: vec![Line { from: "north".into(), to: "south".into(), susceptance: 10.0, capacity: 40.0 }],
        generators: vec![generator("hydro", "north", 12.0, 80.0), generator("gas", "south", 30.0, 60.0)],
        vres: vec![Vres {
            bus: "north".into(),
            cost: 0.0,
            schedule_cap: 30.0,
            forecast: 30.0,
            sigma: 4.5,
            distribution: None,
        }],
        loads: vec![Load { id: "city".into(), bus: "south".into(), demand: 90.0, curtailment_cost: 200.0 }],
        epsilon: 0.05,
        reference_bus: "north".into(),
        distribution: DistributionFamily::normal(),
    })
    .expect("valid case");

    let sol = solve_cco(&case).expect("clearing");
    let prices = cco_prices(&sol).expect("prices");
    let report = cco_profits(&sol, &prices);
    println!("energy prices {:?}", prices.energy);
    println!("rebalance prices {:?}", prices.rebalance);
    for v in adequacy_report((&report, &sol), None, ADEQUACY_TOL) {
        let verdict = match (v.guaranteed, v.pass) {
            (false, _) => "surplus",
            (true, true) => "recovers costs",
            (true, false) => "SHORT",
        };
        println!("{:<10} {:>10.2} {verdict}", v.participant, v.margin);
    }
}
