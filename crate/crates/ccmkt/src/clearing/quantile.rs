use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

use crate::netmodel::{DistributionFamily, Family, MarketCase};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum QuantileError {
    #[error("probability {0} is outside (0.5, 1)")]
    OutOfRange(f64),
    #[error("probability {0} lies beyond the quantile table")]
    BeyondTable(f64),
}

/// Standardized upper quantile of a distribution family together with the
/// violation tolerance that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSpec {
    pub family: DistributionFamily,
    pub epsilon: f64,
    pub value: f64,
}

impl QuantileSpec {
    pub fn new(family: &DistributionFamily, epsilon: f64) -> Result<Self, QuantileError> {
        let value = quantile(family, 1.0 - epsilon)?;
        Ok(Self { family: family.clone(), epsilon, value })
    }
}

/// Unit-variance quantile at `prob` for a symmetric error law.
pub fn quantile(dist: &DistributionFamily, prob: f64) -> Result<f64, QuantileError> {
    if !(prob > 0.5 && prob < 1.0) {
        return Err(QuantileError::OutOfRange(prob));
    }
    if let Some(table) = &dist.quantile_table {
        return table_quantile(table.iter().map(|p| (p.prob, p.value)), prob);
    }
    Ok(match dist.family {
        Family::Normal => normal_quantile(prob),
        Family::UniformSymmetric => 3f64.sqrt() * (2.0 * prob - 1.0),
    })
}

/// Inverse standard normal CDF for `prob` in (0, 1).
///
/// The closed-form inverse is refined by Newton steps on whichever tail is
/// smaller, which keeps the absolute error near machine precision.
pub fn normal_quantile(prob: f64) -> f64 {
    if prob == 0.5 {
        return 0.0;
    }
    let upper = prob > 0.5;
    let tail = if upper { 1.0 - prob } else { prob };
    // tail probability of x is erfc(x/√2)/2
    let mut x = SQRT_2 * erfc_inv(2.0 * tail);
    for _ in 0..3 {
        let f = 0.5 * erfc(x / SQRT_2) - tail;
        let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if density == 0.0 {
            break;
        }
        let step = f / density;
        x += step;
        if step.abs() < 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    if upper {
        x
    } else {
        -x
    }
}

fn table_quantile(points: impl Iterator<Item = (f64, f64)>, prob: f64) -> Result<f64, QuantileError> {
    // the median of a symmetric law is zero, which anchors the table
    let mut prev = (0.5, 0.0);
    for (p, v) in points {
        if prob <= p {
            let w = (prob - prev.0) / (p - prev.0);
            return Ok(prev.1 + w * (v - prev.1));
        }
        prev = (p, v);
    }
    Err(QuantileError::BeyondTable(prob))
}

/// Standardized quantile per bus, honouring per-bus distribution overrides.
pub fn bus_quantiles(case: &MarketCase) -> Result<Vec<f64>, QuantileError> {
    (0..case.buses.len())
        .map(|n| quantile(case.distribution_at(n), 1.0 - case.epsilon))
        .collect()
}
