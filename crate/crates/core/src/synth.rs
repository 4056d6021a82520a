//! Seeded synthetic P–I data, for examples and tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ModelId, ParameterVector};

/// `n` evenly spaced irradiances from 0 to `max_irradiance`.
pub fn irradiance_levels(n: usize, max_irradiance: f64) -> Vec<f64> {
    let last = n.saturating_sub(1).max(1) as f64;
    (0..n).map(|k| max_irradiance * k as f64 / last).collect()
}

/// Evaluates `model` on `irradiance` and adds iid Gaussian noise with
/// standard deviation `sigma` drawn from a ChaCha8 stream seeded by `seed`.
pub fn synthesize(
    id: impl Into<String>,
    model: ModelId,
    params: &ParameterVector,
    irradiance: Vec<f64>,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rate = model.evaluate_grid(params, &irradiance)?;
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidOption(format!("noise sigma {sigma}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut rate {
            *p += noise.sample(&mut rng);
        }
    }
    Ok(Dataset::new(id, irradiance, rate))
}
