//! Applies a variant file to its base case and prints the resulting case as
//! JSON, ready to be saved next to the base.
//!
//!     cargo run --example derive_case -- cases/variants/case2.variant.json > cases/case2.json

use ccmkt::netmodel::load_variant_case;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "cases/variants/case2.variant.json".into());
    let case = match load_variant_case(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    for w in case.warnings() {
        eprintln!("warning: {w}");
    }
    println!("{}", case.to_json());
}
