//! Settles many random real-time outcomes at the chance-constrained prices
//! and compares empirical profit moments and bound violations with the
//! analytic values.

use ccmkt::clearing::solve_cco;
use ccmkt::montecarlo::simulate;
use ccmkt::netmodel::load_case;
use ccmkt::pricing::cco_prices;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "cases/case1.json".into());
    let draws: usize = args.next().map_or(200_000, |s| s.parse().expect("draw count"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let case = load_case(&path).expect("case file");
    let sol = solve_cco(&case).expect("clearing");
    let prices = cco_prices(&sol).expect("prices");

    let t = std::time::Instant::now();
    let stats = simulate(&sol, &prices, draws, seed);
    println!("{draws} draws in {:?}", t.elapsed());
    println!("{:<10} {:>10} {:>10} {:>7} {:>9} {:>9} {:>7}", "who", "analytic", "empirical", "z", "σ", "σ emp", "gap");
    for p in &stats.participants {
        println!(
            "{:<10} {:>10.2} {:>10.2} {:>7.2} {:>9.2} {:>9.2} {:>6.2}%",
            p.participant,
            p.analytic_mean,
            p.mean,
            p.z_score,
            p.analytic_std,
            p.std.unwrap_or(f64::NAN),
            100.0 * p.std_gap.unwrap_or(0.0)
        );
    }
    let worst = stats.bounds.iter().max_by(|a, b| a.frequency.total_cmp(&b.frequency)).unwrap();
    println!(
        "worst bound {} {}: frequency {:.5} (limit {:.5})",
        worst.bound.element,
        worst.bound.kind.name(),
        worst.frequency,
        worst.limit
    );
    println!(
        "max money imbalance {:.2e}, max rebalance residual {:.2e}, draws with negative output {}",
        stats.max_imbalance, stats.max_rebalance_residual, stats.negative_output_draws
    );
    println!("statistics pass: {}", stats.statistics_pass() && stats.books_balance());
}
