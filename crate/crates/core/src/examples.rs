//! Eight bundled synthetic incubations.
//!
//! The numbers in `data/pi_examples.csv` were generated once from
//! [`EXAMPLES`] by [`generate_examples`] and are shipped as fixed values;
//! a test regenerates them and compares. They cover all three curve
//! classes and 8 to 60 irradiance levels. Noise is Gaussian with a
//! standard deviation of 3% of the clean curve's maximum.

use crate::data::{format_check, load_csv, Dataset};
use crate::error::Result;
use crate::model::ModelId;
use crate::synth::{irradiance_levels, synthesize};

const BUNDLED_CSV: &str = include_str!("../data/pi_examples.csv");

/// Noise as a fraction of the clean curve's maximum.
pub const NOISE_FRACTION: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleSpec {
    pub id: &'static str,
    pub model: ModelId,
    /// Roster order of `model`.
    pub params: &'static [f64],
    pub n: usize,
    pub max_irradiance: f64,
    pub seed: u64,
}

pub const EXAMPLES: [ExampleSpec; 8] = [
    ExampleSpec { id: "PI000001", model: ModelId::Lm, params: &[0.015], n: 8, max_irradiance: 600.0, seed: 101 },
    ExampleSpec { id: "PI000002", model: ModelId::Ls5, params: &[8.0, 120.0], n: 8, max_irradiance: 1200.0, seed: 102 },
    ExampleSpec { id: "PI000003", model: ModelId::Ph10, params: &[12.0, 90.0, 700.0], n: 12, max_irradiance: 1800.0, seed: 103 },
    ExampleSpec { id: "PI000004", model: ModelId::Ls2, params: &[6.5, 150.0], n: 12, max_irradiance: 2000.0, seed: 104 },
    ExampleSpec { id: "PI000005", model: ModelId::Ls6, params: &[9.0, 80.0, 0.7], n: 20, max_irradiance: 1500.0, seed: 105 },
    ExampleSpec { id: "PI000006", model: ModelId::Ph11, params: &[14.0, 110.0, 900.0, 3.0], n: 20, max_irradiance: 2200.0, seed: 106 },
    ExampleSpec { id: "PI000007", model: ModelId::Ph03, params: &[11.0, 100.0, 600.0], n: 60, max_irradiance: 2000.0, seed: 107 },
    ExampleSpec { id: "PI000008", model: ModelId::Lm, params: &[0.004], n: 60, max_irradiance: 1000.0, seed: 108 },
];

impl ExampleSpec {
    pub fn generate(&self) -> Result<Dataset> {
        let params = self.model.params(self.params)?;
        let irradiance = irradiance_levels(self.n, self.max_irradiance);
        let clean = self.model.evaluate_grid(&params, &irradiance)?;
        let top = clean.iter().fold(0.0f64, |a, &b| a.max(b));
        synthesize(self.id, self.model, &params, irradiance, NOISE_FRACTION * top, self.seed)
    }
}

/// Regenerates the bundled datasets from their documented parameters.
pub fn generate_examples() -> Result<Vec<Dataset>> {
    EXAMPLES.iter().map(ExampleSpec::generate).collect()
}

/// The bundled CSV text (`pi_information,I,P`).
pub fn example_csv() -> &'static str {
    BUNDLED_CSV
}

/// The eight bundled incubations, parsed from the shipped CSV.
pub fn example_data() -> Vec<Dataset> {
    let raw = load_csv(BUNDLED_CSV.as_bytes()).expect("bundled CSV parses");
    let report = format_check(&raw);
    assert!(report.is_clean(), "bundled CSV is valid");
    report.datasets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_csv;

    #[test]
    fn eight_incubations() {
        let d = example_data();
        assert_eq!(d.len(), 8);
        let mut sizes: Vec<usize> = d.iter().map(Dataset::len).collect();
        sizes.sort();
        sizes.dedup();
        assert_eq!(sizes, vec![8, 12, 20, 60]);
    }

    #[test]
    fn shipped_values_match_generator() {
        assert_eq!(example_data(), generate_examples().unwrap());
        let mut buf = Vec::new();
        write_csv(&generate_examples().unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), BUNDLED_CSV);
    }
}
