use ccmkt::clearing::{sample_scenarios, solve_so};
use ccmkt::netmodel::{load_case, load_variant_case};
use ccmkt::pricing::so_prices;
use ccmkt::profits::so_profits;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "cases/case1.json".into());
    let count: usize = args.next().map_or(1000, |s| s.parse().expect("scenario count"));
    let seed: u64 = args.next().map_or(2019, |s| s.parse().expect("seed"));
    let case = if path.ends_with(".variant.json") { load_variant_case(&path) } else { load_case(&path) }
        .expect("case file");
    let scenarios = sample_scenarios(&case, count, seed);
    let t = std::time::Instant::now();
    let sol = solve_so(&case, &scenarios).expect("clearing");
    println!(
        "objective {:.6} with {count} scenarios in {:?} ({} iterations)",
        sol.objective,
        t.elapsed(),
        sol.lp.iterations
    );
    let prices = so_prices(&sol);
    for (n, bus) in case.buses.iter().enumerate() {
        println!(
            "bus {bus}: day-ahead {:.2}, real-time mean {:.3} std {:.3}",
            sol.balance_dual[n], prices.realtime_mean[n], prices.realtime_std[n]
        );
    }
    let report = so_profits(&sol, &prices);
    for (who, p) in report.rows(&sol) {
        println!("{who:<10} {:>12.2} {:>10.2}", p.expected, p.std);
    }
}
