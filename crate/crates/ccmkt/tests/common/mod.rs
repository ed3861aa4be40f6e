#![allow(dead_code)]

use std::path::PathBuf;

use ccmkt::clearing::{solve_cco, CcoSolution};
use ccmkt::netmodel::{load_any_case, DistributionFamily, Generator, Line, Load, MarketCase, Vres};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn cases_dir() -> PathBuf {
    root().join("cases")
}

pub fn case(name: &str) -> MarketCase {
    let file = if name.ends_with(".json") { name.to_string() } else { format!("{name}.json") };
    load_any_case(cases_dir().join(file)).expect("bundled case")
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[track_caller]
pub fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!((actual - expected).abs() <= tol, "{actual} differs from {expected} by more than {tol}");
}

#[track_caller]
pub fn assert_all_close(actual: &[f64], expected: &[f64], tol: f64) {
    assert_eq!(actual.len(), expected.len());
    for (k, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!((a - e).abs() <= tol, "entry {k}: {a} differs from {e} by more than {tol}");
    }
}

/// Costs on a half-unit grid so that ties between generators happen often.
fn price(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 2.0).round() / 2.0
}

/// A random network of 2 to 5 buses. Supply comfortably exceeds demand, but
/// line limits, reserve caps and the chance rows can still make an instance
/// infeasible, so callers filter on the solve result.
pub fn random_case(seed: u64) -> MarketCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(2..=5usize);
    let buses: Vec<String> = (1..=nb).map(|n| n.to_string()).collect();
    let mut lines = Vec::new();
    let mut joined = std::collections::HashSet::new();
    let capacity = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 500.0 } else { rng.random_range(40.0..200.0) };
    for k in 1..nb {
        let to = rng.random_range(0..k);
        joined.insert((to, k));
        lines.push(Line {
            from: buses[to].clone(),
            to: buses[k].clone(),
            susceptance: rng.random_range(5.0..15.0),
            capacity: capacity(&mut rng),
        });
    }
    for a in 0..nb {
        for b in a + 1..nb {
            if !joined.contains(&(a, b)) && rng.random_bool(0.3) {
                lines.push(Line {
                    from: buses[a].clone(),
                    to: buses[b].clone(),
                    susceptance: rng.random_range(5.0..15.0),
                    capacity: capacity(&mut rng),
                });
            }
        }
    }
    let mut generators = Vec::new();
    for (n, bus) in buses.iter().enumerate() {
        let count = if n == 0 { 1 } else { rng.random_range(0..=2) };
        for _ in 0..count {
            let cost = price(&mut rng, 10.0, 40.0);
            generators.push(Generator {
                id: format!("G{}", generators.len() + 1),
                bus: bus.clone(),
                cost,
                up_cost: cost * rng.random_range(1.0..1.2),
                down_saving: cost * rng.random_range(0.8..1.0),
                capacity: rng.random_range(40.0..150.0),
                up_reserve_cap: rng.random_range(0.0..40.0),
                down_reserve_cap: rng.random_range(0.0..40.0),
            });
        }
    }
    let mut vres = Vec::new();
    for bus in &buses {
        if rng.random_bool(0.6) {
            let forecast = rng.random_range(10.0..60.0);
            let sigma = if rng.random_bool(0.15) { 0.0 } else { forecast * rng.random_range(0.05..0.2) };
            vres.push(Vres { bus: bus.clone(), cost: 0.0, schedule_cap: forecast, forecast, sigma, distribution: None });
        }
    }
    let capacity_total: f64 = generators.iter().map(|g| g.capacity).sum();
    let mut loads = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        loads.push(Load {
            id: format!("L{}", loads.len() + 1),
            bus: buses[rng.random_range(0..nb)].clone(),
            demand: rng.random_range(20.0..100.0),
            curtailment_cost: price(&mut rng, 40.0, 100.0),
        });
    }
    let demand: f64 = loads.iter().map(|l| l.demand).sum();
    if demand > 0.7 * capacity_total {
        let f = 0.7 * capacity_total / demand;
        loads.iter_mut().for_each(|l| l.demand *= f);
    }
    let epsilon = [0.01, 0.025, 0.05, 0.1][rng.random_range(0..4)];
    let distribution = if rng.random_bool(0.2) { DistributionFamily::uniform() } else { DistributionFamily::normal() };
    MarketCase::from_parts(MarketCase {
        buses,
        lines,
        generators,
        vres,
        loads,
        epsilon,
        reference_bus: "1".into(),
        distribution,
    })
    .expect("generated case is valid")
}

/// The first `count` random cases with an optimal clearing, from seeds
/// `start, start + 1, ...`.
pub fn feasible_cases(count: usize, start: u64) -> Vec<(u64, MarketCase, CcoSolution)> {
    let mut out = Vec::new();
    let mut seed = start;
    while out.len() < count {
        assert!(seed < start + 20 * count as u64, "too few feasible instances");
        let case = random_case(seed);
        if let Ok(sol) = solve_cco(&case) {
            out.push((seed, case, sol));
        }
        seed += 1;
    }
    out
}
