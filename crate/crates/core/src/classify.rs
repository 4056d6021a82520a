//! Labels a curve as light-limited, light-saturated or photoinhibited.
//!
//! Three representative models are fitted under least squares: `lm`, LS5
//! (Jassby tanh) and Ph10 (double tanh). The label comes from the
//! lowest-AICc candidate, with two adjustments:
//!
//! * candidates within 2 AICc units of the best resolve to the simplest
//!   class among them;
//! * a Ph10 fit whose `I_beta` lies at or beyond the largest observed
//!   irradiance is not evidence of photoinhibition and cannot carry the
//!   photoinhibited label.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_with_partner, Criterion, FitOptions, FitResult};
use crate::inference::information_criteria;
use crate::model::{ModelClass, ModelId, Param, ParameterVector};

pub const CANDIDATES: [ModelId; 3] = [ModelId::Lm, ModelId::Ls5, ModelId::Ph10];

/// AICc differences below this are treated as ties.
pub const AICC_TIE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub model: ModelId,
    /// `None` when the fit failed.
    pub aicc: Option<f64>,
    pub params: Option<ParameterVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "guard", rename_all = "kebab-case")]
pub enum Guard {
    /// The Ph10 candidate put `I_beta` at or past `max(I)`.
    InhibitionOutsideRange { i_beta: f64, max_irradiance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassLabel {
    pub dataset_id: String,
    pub label: ModelClass,
    pub evidence: Vec<Evidence>,
    pub chosen: ModelId,
    pub guards_applied: Vec<Guard>,
}

fn class_rank(c: ModelClass) -> usize {
    ModelClass::ALL.iter().position(|&x| x == c).unwrap_or(usize::MAX)
}

/// Classifies one dataset. The criterion in `options` is ignored: the
/// candidates are always fitted by least squares.
pub fn classify(data: &Dataset, options: &FitOptions) -> Result<ClassLabel> {
    data.ensure_valid()?;
    let options = FitOptions {
        criterion: Criterion::Mse,
        ..options.clone()
    };
    let lm = fit_with_partner(data, ModelId::Lm, &options, None);
    let ls5 = fit_with_partner(data, ModelId::Ls5, &options, None);
    let ph10 = fit_with_partner(data, ModelId::Ph10, &options, ls5.as_ref().ok());
    let fits: [&Result<FitResult>; 3] = [&lm, &ls5, &ph10];
    if fits.iter().all(|f| f.is_err()) {
        return Err(Error::AllModelsFailed);
    }

    let evidence: Vec<Evidence> = CANDIDATES
        .iter()
        .zip(fits)
        .map(|(&model, f)| Evidence {
            model,
            aicc: f.as_ref().ok().map(|f| information_criteria(f).aicc),
            params: f.as_ref().ok().map(|f| f.params.clone()),
        })
        .collect();

    let max_i = data.max_irradiance();
    let mut guards = Vec::new();
    if let Ok(f) = &ph10 {
        let i_beta = f.params.get(Param::IBeta).unwrap_or(f64::INFINITY);
        if !(i_beta < max_i) {
            guards.push(Guard::InhibitionOutsideRange {
                i_beta,
                max_irradiance: max_i,
            });
        }
    }
    let eligible: Vec<(ModelId, f64)> = evidence
        .iter()
        .filter(|e| !(e.model == ModelId::Ph10 && !guards.is_empty()))
        .filter_map(|e| e.aicc.filter(|a| !a.is_nan()).map(|a| (e.model, a)))
        .collect();

    let chosen = match eligible.iter().map(|e| e.1).min_by(f64::total_cmp) {
        Some(best) => eligible
            .iter()
            .filter(|e| e.1 - best < AICC_TIE || e.1 == best)
            .min_by_key(|e| class_rank(e.0.class()))
            .map(|e| e.0)
            .unwrap_or(ModelId::Ls5),
        // Only a guarded Ph10 fit survived.
        None => ModelId::Ls5,
    };
    Ok(ClassLabel {
        dataset_id: data.id.clone(),
        label: chosen.class(),
        evidence,
        chosen,
        guards_applied: guards,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    /// Counts in the order light-limited, light-saturated, photoinhibited.
    pub counts: Vec<(ModelClass, usize)>,
    /// Relative frequencies over successful classifications.
    pub frequencies: Vec<(ModelClass, f64)>,
    /// Number of datasets submitted.
    pub total: usize,
    pub failures: usize,
}

impl ClassSummary {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a Result<ClassLabel>>) -> Self {
        let mut counts = [0usize; 3];
        let mut total = 0;
        let mut failures = 0;
        for l in labels {
            total += 1;
            match l {
                Ok(l) => counts[class_rank(l.label)] += 1,
                Err(_) => failures += 1,
            }
        }
        let ok = total - failures;
        ClassSummary {
            counts: ModelClass::ALL.iter().copied().zip(counts).collect(),
            frequencies: ModelClass::ALL
                .iter()
                .zip(counts)
                .map(|(&c, n)| (c, if ok == 0 { 0.0 } else { n as f64 / ok as f64 }))
                .collect(),
            total,
            failures,
        }
    }

    pub fn classified(&self) -> usize {
        self.total - self.failures
    }

    pub fn frequency(&self, class: ModelClass) -> f64 {
        self.frequencies
            .iter()
            .find(|f| f.0 == class)
            .map_or(0.0, |f| f.1)
    }
}

/// Classifies every dataset (in parallel); failures are counted, not fatal.
pub fn classify_batch(
    datasets: &[Dataset],
    options: &FitOptions,
) -> Result<(Vec<Result<ClassLabel>>, ClassSummary)> {
    if datasets.is_empty() {
        return Err(Error::Empty("classify_batch needs at least one dataset"));
    }
    let labels: Vec<Result<ClassLabel>> = datasets.par_iter().map(|d| classify(d, options)).collect();
    let summary = ClassSummary::from_labels(&labels);
    Ok((labels, summary))
}
