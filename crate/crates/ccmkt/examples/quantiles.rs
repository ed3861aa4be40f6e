//! Safety factors for a few violation tolerances, and the reserve margin
//! they imply for each uncertain bus of a case.

use ccmkt::clearing::{bus_quantiles, QuantileSpec};
use ccmkt::netmodel::{load_any_case, DistributionFamily};

fn main() {
    println!("epsilon   normal  uniform");
    for eps in [0.2, 0.1, 0.05, 0.025, 0.01, 0.001] {
        let n = QuantileSpec::new(&DistributionFamily::normal(), eps).unwrap();
        let u = QuantileSpec::new(&DistributionFamily::uniform(), eps).unwrap();
        println!("{eps:<8} {:>7.4} {:>8.4}", n.value, u.value);
    }

    let path = std::env::args().nth(1).unwrap_or_else(|| "cases/case1.json".into());
    let case = load_any_case(&path).expect("case file");
    let q = bus_quantiles(&case).expect("quantiles");
    println!("\n{path}, epsilon {}", case.epsilon);
    for (n, bus) in case.buses.iter().enumerate() {
        let sigma = case.vres_at(n).sigma;
        if sigma > 0.0 {
            println!("  bus {bus}: sigma {sigma:.2}, margin {:.3}", q[n] * sigma);
        }
    }
}
