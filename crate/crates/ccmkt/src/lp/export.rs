use std::fmt::Write as _;

use super::{LpProblem, RowKind};

/// Renders the problem in the CPLEX LP text format understood by most
/// external solvers. Names are sanitized to the format's character set.
pub fn write_lp_format(problem: &LpProblem) -> String {
    let mut out = String::new();
    let names: Vec<String> = problem.vars().iter().map(|v| sanitize(&v.name)).collect();
    let _ = writeln!(out, "\\ {}", problem.name);
    out.push_str("Minimize\n obj:");
    let mut any = false;
    for (v, name) in problem.vars().iter().zip(&names) {
        if v.cost != 0.0 {
            push_term(&mut out, v.cost, name);
            any = true;
        }
    }
    if !any {
        out.push_str(" 0 ");
        out.push_str(names.first().map(String::as_str).unwrap_or("x"));
    }
    out.push_str("\nSubject To\n");
    for row in problem.rows() {
        let _ = write!(out, " {}:", sanitize(&row.name));
        if row.terms.is_empty() {
            out.push_str(" 0 ");
            out.push_str(names.first().map(String::as_str).unwrap_or("x"));
        }
        for (v, a) in &row.terms {
            push_term(&mut out, *a, &names[v.0]);
        }
        let op = match row.kind {
            RowKind::Eq => "=",
            RowKind::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in problem.vars().iter().zip(&names) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(v.lower), fmt_num(v.upper));
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {name} >= {}", fmt_num(v.lower));
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", fmt_num(v.upper));
            }
        }
    }
    out.push_str("End\n");
    out
}

fn push_term(out: &mut String, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {name}", fmt_num(-coef));
    } else {
        let _ = write!(out, " + {} {name}", fmt_num(coef));
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.".contains(c) { c } else { '_' })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, '_');
    }
    s
}
