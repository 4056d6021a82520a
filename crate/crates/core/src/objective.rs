//! Least-squares and Gaussian likelihood objectives.

use std::f64::consts::PI;

use crate::data::Dataset;
use crate::error::Result;
use crate::model::{ModelId, ParameterVector};

/// Lower bound on the profiled variance `SSE / n` in the likelihood.
pub const SIGMA2_FLOOR: f64 = 1e-30;

/// Sum of squared residuals for natural values in roster order; `R` is the
/// trailing value when `respiration` is set. NaN model output yields NaN.
pub(crate) fn sse_values(model: ModelId, values: &[f64], respiration: bool, data: &Dataset) -> f64 {
    let np = model.parameters().len();
    let r = if respiration { values[np] } else { 0.0 };
    let gross = &values[..np];
    data.irradiance
        .iter()
        .zip(&data.rate)
        .map(|(&i, &p)| {
            let e = p - (model.gross_unchecked(gross, i) - r);
            e * e
        })
        .sum()
}

pub fn sse(model: ModelId, params: &ParameterVector, data: &Dataset) -> Result<f64> {
    let pred = model.evaluate_grid(params, &data.irradiance)?;
    Ok(pred.iter().zip(&data.rate).map(|(m, p)| (p - m) * (p - m)).sum())
}

/// `(1/n) * sum (P_obs - P_model)^2`.
pub fn mse_objective(model: ModelId, params: &ParameterVector, data: &Dataset) -> Result<f64> {
    Ok(sse(model, params, data)? / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllValue {
    pub value: f64,
    /// Set when `SSE / n` fell below [`SIGMA2_FLOOR`].
    pub floored: bool,
}

/// Gaussian negative log-likelihood with the variance profiled out:
/// `(n/2) [ln(2 pi SSE/n) + 1]`.
pub fn nll_from_sse(sse: f64, n: usize) -> NllValue {
    let n = n as f64;
    let s2 = sse / n;
    let floored = !(s2 >= SIGMA2_FLOOR);
    let s2 = if floored { SIGMA2_FLOOR } else { s2 };
    NllValue {
        value: 0.5 * n * ((2.0 * PI * s2).ln() + 1.0),
        floored,
    }
}

pub fn nll_objective(model: ModelId, params: &ParameterVector, data: &Dataset) -> Result<NllValue> {
    Ok(nll_from_sse(sse(model, params, data)?, data.len()))
}
