//! Data-informed starting values for the simplex.
//!
//! The heuristic reads three features off the data: the initial slope from
//! a straight line through the lowest-irradiance levels, the maximum
//! observed rate, and the slope of the decline past the maximum (if any).
//! Every model's start is assembled from those.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{double_tanh_gamma, ModelId, Param, ParameterVector};

/// Features shared by all model starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartFeatures {
    pub alpha: f64,
    pub respiration: f64,
    pub p_max: f64,
    pub i_alpha: f64,
    pub beta: f64,
    pub i_beta: f64,
    pub p_s: f64,
    pub i_alpha_s: f64,
    pub i_beta_s: f64,
}

/// Ordinary least-squares line `(slope, intercept)`.
fn ols(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn start_features(data: &Dataset, respiration: bool) -> Result<StartFeatures> {
    let n = data.len();
    let m = (n / 3).clamp(3, 4);
    let levels = distinct_sorted(&data.irradiance);
    if levels.len() < m {
        return Err(Error::TooFewLowLightPoints { needed: m });
    }
    let cutoff = levels[m - 1];
    let pairs: Vec<(f64, f64)> = data
        .irradiance
        .iter()
        .copied()
        .zip(data.rate.iter().copied())
        .collect();
    let low: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.0 <= cutoff).collect();
    let (slope, intercept) = ols(&low).ok_or(Error::TooFewLowLightPoints { needed: m })?;

    let max_i = data.max_irradiance();
    let max_p = data.max_rate();
    let scale = data.rate.iter().fold(0.0f64, |a, p| a.max(p.abs())).max(f64::MIN_POSITIVE);
    let alpha = slope.max(1e-6 * scale / max_i);
    let respiration = if respiration { (-intercept).max(0.0) } else { 0.0 };
    let mut p_max = max_p + respiration;
    if !(p_max > 0.0) {
        p_max = alpha * max_i;
    }
    let i_alpha = p_max / alpha;

    // First irradiance at which the maximum rate is observed.
    let i_star = pairs
        .iter()
        .find(|p| p.1 == max_p)
        .map(|p| p.0)
        .unwrap_or(max_i);
    let high: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.0 > i_star).collect();
    let decline = ols(&high).map(|(s, _)| s).filter(|s| *s < 0.0);
    let (beta, i_beta) = match decline {
        Some(s) => (-s, p_max / -s),
        None => {
            let ib = 3.0 * max_i;
            (p_max / ib, ib)
        }
    };
    let p_s = 1.2 * p_max;
    Ok(StartFeatures {
        alpha,
        respiration,
        p_max,
        i_alpha,
        beta,
        i_beta,
        p_s,
        i_alpha_s: p_s / alpha,
        i_beta_s: i_beta,
    })
}

impl StartFeatures {
    /// Start vector for `model` in roster order (with `R` last when enabled).
    pub fn for_model(&self, model: ModelId, respiration: bool) -> ParameterVector {
        let shape_theta: f64 = 0.5;
        let theta_beta: f64 = 0.5;
        // Ph16 is only defined everywhere when theta_beta >= 4 theta^2.
        let ph16_theta = shape_theta.min(0.9 * theta_beta.sqrt() / 2.0);
        let mut pairs: Vec<(Param, f64)> = model
            .parameters()
            .iter()
            .map(|&p| {
                let v = match p {
                    Param::Alpha => self.alpha,
                    Param::Beta => self.beta,
                    Param::PMax => self.p_max,
                    Param::Ps => self.p_s,
                    Param::IAlpha => self.i_alpha,
                    Param::IBeta => self.i_beta,
                    Param::IAlphaS => self.i_alpha_s,
                    Param::IBetaS => self.i_beta_s,
                    Param::Theta if model == ModelId::Ph16 => ph16_theta,
                    Param::Theta => shape_theta,
                    Param::Gamma if model == ModelId::Ls7 => 2.0,
                    Param::Gamma => double_tanh_gamma(),
                    Param::B => 2.0,
                    Param::ThetaBeta => theta_beta,
                    Param::R => self.respiration,
                };
                (p, v)
            })
            .collect();
        if respiration {
            pairs.push((Param::R, self.respiration));
        }
        ParameterVector::from_pairs(pairs)
    }
}

/// Deterministic starting values for `model` on `data`.
pub fn suggest_start(model: ModelId, data: &Dataset, respiration: bool) -> Result<ParameterVector> {
    Ok(start_features(data, respiration)?.for_model(model, respiration))
}
