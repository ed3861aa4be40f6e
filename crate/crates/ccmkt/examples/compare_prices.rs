//! Puts the uncertainty-uniform prices next to the scenario price moments and
//! prints a text histogram of one bus's real-time price.
//!
//!     cargo run --release --example compare_prices -- cases/case4.json 3

use ccmkt::clearing::{sample_scenarios, solve_cco, solve_so};
use ccmkt::cli::{histogram, price_comparison};
use ccmkt::netmodel::load_any_case;
use ccmkt::pricing::{cco_prices, so_prices};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "cases/case4.json".into());
    let bus = args.next().unwrap_or_else(|| "3".into());
    let case = load_any_case(&path).expect("case file");
    let cco = solve_cco(&case).expect("clearing");
    let prices = cco_prices(&cco).expect("prices");
    let so = solve_so(&case, &sample_scenarios(&case, 1000, 1)).expect("scenario clearing");
    let sp = so_prices(&so);

    println!("{:<4} {:<13} {:>8} {:>8} {:>7}", "", "action", "cco", "so mean", "so std");
    for l in price_comparison(&cco, &prices, Some(&sp)) {
        let (m, s) = l.so.unwrap_or((f64::NAN, f64::NAN));
        println!("{:<4} {:<13} {:>8.2} {:>8.2} {:>7.2}", l.participant, l.action, l.cco, m, s);
    }

    let n = case.bus_index(&bus).expect("bus");
    let values: Vec<f64> = sp.realtime.iter().map(|r| r[n]).collect();
    println!("\nreal-time price at bus {bus}");
    for b in histogram(&values, &so.scenarios.probability).iter().filter(|b| b.count > 0) {
        let bar = "#".repeat((b.probability * 200.0).ceil() as usize);
        println!("  [{:>6.2}, {:>6.2}) {:>4} {bar}", b.low, b.high, b.count);
    }
}
