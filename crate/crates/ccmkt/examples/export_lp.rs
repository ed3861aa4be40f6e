//! Writes the chance-constrained model of a case in LP file format, for
//! cross-checking with an external solver.
//!
//!     cargo run --example export_lp -- cases/case1.json > case1.lp

use ccmkt::clearing::build_dcco;
use ccmkt::netmodel::load_any_case;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "cases/case1.json".into());
    let case = load_any_case(&path).expect("case file");
    let model = build_dcco(&case).expect("model");
    let rows = model.row_count(&case);
    eprintln!(
        "{} columns, {} rows ({} by the closed-form count)",
        model.lp.num_vars(),
        rows.emitted,
        rows.quoted_formula
    );
    print!("{}", ccmkt::lp::write_lp_format(&model.lp));
}
