//! Chance-constrained and scenario-based clearing of a single-period
//! electricity market, with dual-based pricing, expected-profit analysis and
//! Monte Carlo settlement checks.

pub mod clearing;
pub mod cli;
pub mod lp;
pub mod montecarlo;
pub mod netmodel;
pub mod pricing;
pub mod profits;
