use ccmkt::clearing::solve_cco;
use ccmkt::netmodel::{load_case, load_variant_case};
use ccmkt::pricing::cco_prices;
use ccmkt::profits::{cco_profits, ADEQUACY_TOL};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "cases/case1.json".into());
    let case = if path.ends_with(".variant.json") { load_variant_case(&path) } else { load_case(&path) }
        .expect("case file");
    let sol = solve_cco(&case).expect("clearing");
    let prices = cco_prices(&sol).expect("prices");
    let report = cco_profits(&sol, &prices);
    let op = report.operator;
    println!("objective {:.6}", sol.objective);
    println!(
        "operator income {:.4}: prices {:.6}, adders {:.2e}, congestion {:.6}",
        op.expected, op.price_part, op.adder_part, op.congestion
    );
    println!("{:<10} {:>12} {:>10}", "who", "expected", "std");
    for (who, p) in report.rows(&sol) {
        println!("{who:<10} {:>12.2} {:>10.2}", p.expected, p.std);
    }
    match report.verify(&sol, ADEQUACY_TOL) {
        Ok(()) => println!("identities and adequacy hold"),
        Err(e) => println!("check failed: {e}"),
    }
}
