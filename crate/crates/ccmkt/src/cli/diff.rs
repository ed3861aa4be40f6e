//! Comparison of reproduced cells against reference value files.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::tables::Cell;
use crate::profits::fmt_fixed;

/// Slack added to every judged tolerance so that values printed to two
/// decimals compare cleanly against unrounded results.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Deterministic clearing cells.
    pub cco: f64,
    /// Scenario price mean.
    pub so_mean: f64,
    /// Scenario price spread.
    pub so_std: f64,
    /// Operator profit of the scenario-based clearing, which is zero by
    /// construction regardless of the sample.
    pub so_operator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cco: 0.01, so_mean: 0.5, so_std: 1.0, so_operator: 1e-4 }
    }
}

impl Tolerances {
    /// Tolerance for a cell, or `None` for cells that depend on the
    /// particular scenario sample and are reported without a verdict.
    pub fn for_cell(&self, cell: &Cell) -> Option<f64> {
        match cell.section.as_str() {
            "so_price" if cell.field.ends_with("_mean") => Some(self.so_mean),
            "so_price" => Some(self.so_std),
            "so_profit" if cell.element == "Operator" => Some(self.so_operator),
            "so_profit" => None,
            _ => Some(self.cco),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffStatus {
    Match,
    Mismatch,
    Missing,
    Informational,
}

impl DiffStatus {
    pub fn name(self) -> &'static str {
        match self {
            DiffStatus::Match => "match",
            DiffStatus::Mismatch => "mismatch",
            DiffStatus::Missing => "missing",
            DiffStatus::Informational => "info",
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, DiffStatus::Mismatch | DiffStatus::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDiff {
    pub expected: Cell,
    pub actual: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: DiffStatus,
}

#[derive(Debug, thiserror::Error)]
pub enum ExpectedError {
    #[error("reference file: {0}")]
    Csv(#[from] csv::Error),
    #[error("reference file line {line}: `{value}` is not a number")]
    Number { line: u64, value: String },
}

/// Reads `case,section,element,field,value` rows; `#` starts a comment line.
pub fn read_expected<R: Read>(input: R) -> Result<Vec<Cell>, ExpectedError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let value = rec[4].parse().map_err(|_| ExpectedError::Number { line, value: rec[4].to_string() })?;
        out.push(Cell {
            case: rec[0].to_string(),
            section: rec[1].to_string(),
            element: rec[2].to_string(),
            field: rec[3].to_string(),
            value,
        });
    }
    Ok(out)
}

/// Judges every expected cell against the matching actual cell.
pub fn diff_cells(expected: &[Cell], actual: &[Cell], tol: &Tolerances) -> Vec<CellDiff> {
    let found: HashMap<(&str, &str, &str, &str), f64> = actual
        .iter()
        .map(|c| ((c.case.as_str(), c.section.as_str(), c.element.as_str(), c.field.as_str()), c.value))
        .collect();
    expected
        .iter()
        .map(|e| {
            let actual = found.get(&(e.case.as_str(), e.section.as_str(), e.element.as_str(), e.field.as_str())).copied();
            let tolerance = tol.for_cell(e);
            let status = match (actual, tolerance) {
                (None, _) => DiffStatus::Missing,
                (Some(_), None) => DiffStatus::Informational,
                (Some(a), Some(t)) if (a - e.value).abs() <= t + ROUNDING_SLACK => DiffStatus::Match,
                (Some(_), Some(_)) => DiffStatus::Mismatch,
            };
            CellDiff { expected: e.clone(), actual, tolerance, status }
        })
        .collect()
}

pub fn write_diff_csv<W: Write>(diffs: &[CellDiff], digits: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "section", "element", "field", "expected", "actual", "delta", "tolerance", "status"])?;
    for d in diffs {
        let e = &d.expected;
        let actual = d.actual.map(|a| a.to_string()).unwrap_or_default();
        let delta = d.actual.map(|a| fmt_fixed(a - e.value, digits.max(6))).unwrap_or_default();
        let tol = d.tolerance.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            &e.case,
            &e.section,
            &e.element,
            &e.field,
            &fmt_fixed(e.value, digits),
            &actual,
            &delta,
            &tol,
            d.status.name(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(section: &str, element: &str, field: &str, value: f64) -> Cell {
        Cell { case: "c".into(), section: section.into(), element: element.into(), field: field.into(), value }
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let text = "# reference values\ncase,section,element,field,value\n# more\nc, profit, G1, expected, 500.00\n";
        let cells = read_expected(text.as_bytes()).unwrap();
        assert_eq!(cells, vec![cell("profit", "G1", "expected", 500.0)]);
    }

    #[test]
    fn statuses_follow_the_section_rules() {
        let expected = vec![
            cell("profit", "G1", "expected", 500.0),
            cell("profit", "G2", "expected", 10.0),
            cell("so_price", "G1", "up_mean", 25.57),
            cell("so_profit", "G1", "expected", 557.4),
            cell("so_profit", "Operator", "expected", 0.0),
        ];
        let actual = vec![
            cell("profit", "G1", "expected", 500.004),
            cell("profit", "G2", "expected", 10.02),
            cell("so_price", "G1", "up_mean", 25.2),
            cell("so_profit", "G1", "expected", 0.0),
        ];
        let st: Vec<_> = diff_cells(&expected, &actual, &Tolerances::default()).iter().map(|d| d.status).collect();
        assert_eq!(
            st,
            [
                DiffStatus::Match,
                DiffStatus::Mismatch,
                DiffStatus::Match,
                DiffStatus::Informational,
                DiffStatus::Missing
            ]
        );
    }

    #[test]
    fn bad_number_names_its_line() {
        let text = "case,section,element,field,value\nc,profit,G1,expected,abc\n";
        match read_expected(text.as_bytes()) {
            Err(ExpectedError::Number { line, value }) => assert_eq!((line, value.as_str()), (2, "abc")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
