//! Model builders for the nominal, chance-constrained and scenario-based
//! clearing problems, and the solve steps that map LP output back to
//! named market quantities.

mod dcco;
mod nominal;
pub mod quantile;
mod scenarios;
mod so;

pub use dcco::{build_dcco, solve_cco, solve_cco_face, solve_cco_with, CcoSolution, FaceChoice, DccoIndex, DccoModel, RowCount};
pub use nominal::{build_nominal, NominalIndex, NominalModel};
pub use quantile::{bus_quantiles, normal_quantile, quantile, QuantileError, QuantileSpec};
pub use scenarios::{sample_scenarios, unit_error, ScenarioSet};
pub use so::{build_so, solve_so, solve_so_with, SoIndex, SoModel, SoSolution};

use crate::lp::{LpError, VarId};
use crate::netmodel::CaseError;

/// Served demand at or below this is treated as zero.
pub const ASSUMPTION_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ClearingError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Quantile(#[from] QuantileError),
    #[error("solver failure: {0}")]
    Lp(#[from] LpError),
    #[error("{0} is infeasible")]
    Infeasible(String),
    #[error("{0} is unbounded")]
    Unbounded(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
}

/// Sums duplicate coefficients so each variable appears once per row.
pub(crate) fn merge_terms(mut terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += a,
            _ => out.push((v, a)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}
