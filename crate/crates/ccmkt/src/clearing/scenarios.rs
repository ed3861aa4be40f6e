use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::netmodel::{DistributionFamily, Family, MarketCase};

/// Equiprobable renewable-output scenarios, one row per scenario and one
/// column per bus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub buses: Vec<String>,
    pub probability: Vec<f64>,
    pub output: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.probability.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probability.is_empty()
    }

    /// A single scenario carrying probability one.
    pub fn single(case: &MarketCase, output: Vec<f64>) -> Self {
        Self { buses: case.buses.clone(), probability: vec![1.0], output: vec![output], seed: 0 }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["scenario".to_string(), "probability".to_string()];
        header.extend(self.buses.iter().cloned());
        w.write_record(&header)?;
        for (k, (p, row)) in self.probability.iter().zip(&self.output).enumerate() {
            let mut rec = vec![k.to_string(), p.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unit-variance draw from `dist`, addressed by `(seed, stream, counter)`.
///
/// Each address owns its own slice of the keystream, so values do not depend
/// on how many other draws were made or in which order.
pub fn unit_error(dist: &DistributionFamily, seed: u64, stream: u64, counter: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(counter) << 8);
    match dist.family {
        Family::Normal => rng.sample(StandardNormal),
        Family::UniformSymmetric => 3f64.sqrt() * rng.random_range(-1.0..1.0),
    }
}

/// Draws `count` scenarios around each bus forecast, clamping negative
/// output to zero.
pub fn sample_scenarios(case: &MarketCase, count: usize, seed: u64) -> ScenarioSet {
    let count = count.max(1);
    let nb = case.buses.len();
    let output = (0..count)
        .map(|k| {
            (0..nb)
                .map(|n| {
                    let v = case.vres_at(n);
                    if v.sigma == 0.0 {
                        return v.forecast;
                    }
                    let e = unit_error(case.distribution_at(n), seed, n as u64, k as u64);
                    (v.forecast + v.sigma * e).max(0.0)
                })
                .collect()
        })
        .collect();
    ScenarioSet { buses: case.buses.clone(), probability: vec![1.0 / count as f64; count], output, seed }
}
