//! Clears a case with the chance-constrained model and prints the scheduling
//! and real-time tables: quantities, their spread, and the prices paid.

use ccmkt::clearing::solve_cco;
use ccmkt::netmodel::{load_case, load_variant_case};
use ccmkt::pricing::cco_prices;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "cases/case1.json".into());
    let case = if path.ends_with(".variant.json") { load_variant_case(&path) } else { load_case(&path) }
        .expect("case file");
    let t = std::time::Instant::now();
    let sol = solve_cco(&case).expect("clearing");
    let prices = cco_prices(&sol).expect("prices");
    println!("objective {:.6} in {:?}", sol.objective, t.elapsed());

    println!("\nscheduling stage");
    for (i, g) in case.generators.iter().enumerate() {
        println!("  {:<4} p     {:>8.2}  price {:>6.2}", g.id, sol.dispatch[i], prices.generator_energy[i]);
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).unwrap();
        println!("  W{:<3} w_sch {:>8.2}  price {:>6.2}", v.bus, sol.vres_sched[n], prices.vres_schedule[n]);
    }
    for l in &case.loads {
        let n = case.bus_index(&l.bus).unwrap();
        println!("  {:<4} load  {:>8.2}  price {:>6.2}", l.id, l.demand, prices.load_schedule[n]);
    }

    println!("\nreal-time stage (expected, std, price)");
    for (i, g) in case.generators.iter().enumerate() {
        let s = sol.sigma(case.generator_bus(i));
        println!(
            "  {:<4} up   {:>7.2} ({:>5.2}) {:>6.2}   down {:>7.2} ({:>5.2}) {:>6.2}",
            g.id,
            sol.reserve_up[i],
            sol.up_share[i] * s,
            prices.generator_up[i],
            sol.reserve_down[i],
            sol.down_share[i] * s,
            prices.generator_down[i]
        );
    }
    for v in &case.vres {
        let n = case.bus_index(&v.bus).unwrap();
        println!(
            "  W{:<3} spill {:>6.2} ({:>5.2}) {:>6.2}",
            v.bus,
            sol.vres_spill[n],
            sol.spill_share[n] * v.sigma,
            prices.vres_deviation[n]
        );
    }
    for (j, l) in case.loads.iter().enumerate() {
        let n = case.load_bus(j);
        println!(
            "  {:<4} curtail {:>4.2} ({:>5.2}) {:>6.2}",
            l.id,
            sol.curtail[j],
            sol.curtail_share[j] * sol.sigma(n),
            prices.curtailment[n]
        );
    }
}
