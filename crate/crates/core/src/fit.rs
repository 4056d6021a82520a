//! Fitting entry points: a single model, or all 24 under shared options.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{DerivedQuantities, ModelId, Param, ParameterVector};
use crate::objective::{nll_from_sse, sse_values};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::start::start_features;
use crate::transform::ParamTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Mse,
    Mle,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Criterion::Mse),
            "mle" => Ok(Criterion::Mle),
            _ => Err(Error::InvalidOption(format!("unknown criterion `{s}`"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Mse => "mse",
            Criterion::Mle => "mle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub criterion: Criterion,
    pub respiration: bool,
    pub max_iterations: usize,
    /// Threshold on the objective spread across simplex vertices.
    pub tolerance: f64,
    /// Jittered starts in addition to the heuristic one.
    pub restarts: usize,
    pub seed: u64,
    pub bounds: Vec<(Param, f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            criterion: Criterion::Mse,
            respiration: false,
            max_iterations: 2000,
            tolerance: 1e-10,
            restarts: 3,
            seed: 1,
            bounds: Vec::new(),
        }
    }
}

impl FitOptions {
    fn check(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidOption(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidOption("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn transform_for(&self, model: ModelId) -> Result<ParamTransform> {
        let mut t = ParamTransform::new(model, self.respiration);
        for &(p, lo, hi) in &self.bounds {
            if t.names().contains(&p) {
                t = t.with_bounds(p, lo, hi)?;
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelId,
    pub dataset_id: String,
    pub params: ParameterVector,
    pub criterion: Criterion,
    pub respiration: bool,
    /// Objective at the optimum (MSE or profiled negative log-likelihood).
    pub objective_value: f64,
    pub sse: f64,
    /// `sse / n`.
    pub sigma2_hat: f64,
    /// Set when `sigma2_hat` hit the likelihood floor.
    pub sigma2_floored: bool,
    pub converged: bool,
    pub iterations: usize,
    pub starts: usize,
    pub n: usize,
    /// Free curve parameters, including `R` when enabled (sigma excluded).
    pub k: usize,
    pub derived: Option<DerivedQuantities>,
    /// Optimum in transformed coordinates.
    pub transformed: Vec<f64>,
    pub transform: ParamTransform,
    pub notes: Vec<String>,
}

impl FitResult {
    /// Parameter count used by the information criteria (sigma included).
    pub fn k_ic(&self) -> usize {
        self.k + 1
    }
}

struct Problem<'a> {
    model: ModelId,
    data: &'a Dataset,
    transform: ParamTransform,
    options: &'a FitOptions,
}

impl Problem<'_> {
    fn sse_at(&self, u: &[f64]) -> f64 {
        let v = self.transform.inverse_values(u);
        sse_values(self.model, &v, self.options.respiration, self.data)
    }

    fn objective(&self, u: &[f64]) -> f64 {
        let v = self.transform.inverse_values(u);
        if !self.model.defined_on(&v, self.data.max_irradiance()) {
            return f64::INFINITY;
        }
        let sse = sse_values(self.model, &v, self.options.respiration, self.data);
        if !sse.is_finite() {
            return f64::INFINITY;
        }
        match self.options.criterion {
            Criterion::Mse => sse / self.data.len() as f64,
            Criterion::Mle => nll_from_sse(sse, self.data.len()).value,
        }
    }

    /// Simplex run from `start`, then re-run from each optimum while the
    /// objective keeps improving. The re-runs tighten the spread threshold
    /// to `1e-4 * |f|` near a zero-residual optimum, where the absolute
    /// tolerance alone would stop well short of it.
    fn minimize(&self, start: &[f64]) -> Result<(Vec<f64>, f64, usize, bool)> {
        let f = |u: &[f64]| self.objective(u);
        let nm = |tolerance: f64| NelderMeadOptions {
            max_iterations: self.options.max_iterations,
            tolerance,
        };
        let tol = self.options.tolerance;
        let mut r = nelder_mead(f, start, &nm(tol))?;
        // A re-run that meets its (tighter) threshold also counts.
        let mut converged = r.converged;
        let mut iterations = r.iterations;
        for _ in 0..20 {
            let polish_tol = tol.min(1e-4 * r.value.abs()).max(1e-300);
            let next = nelder_mead(f, &r.x, &nm(polish_tol))?;
            iterations += next.iterations;
            converged |= next.converged;
            let gain = r.value - next.value;
            if next.value <= r.value {
                r = next;
            }
            if !(gain > polish_tol) {
                break;
            }
        }
        Ok((r.x, r.value, iterations, converged))
    }
}

/// Scales each start coordinate by `exp(u)`, `u ~ U[-0.5, 0.5]`, then pulls
/// the result back inside the open domain of its transform.
fn jitter(start: &[f64], names: &[Param], rng: &mut ChaCha8Rng) -> Vec<f64> {
    start
        .iter()
        .zip(names)
        .map(|(&x, &p)| {
            let y = x * rng.gen_range(-0.5f64..=0.5).exp();
            match p {
                Param::Theta | Param::ThetaBeta => y.clamp(0.01, 0.99),
                Param::Gamma => y.clamp(1.01, 9.9),
                Param::B => y.max(1.01),
                _ => y,
            }
        })
        .collect()
}

/// Inhibition scale, relative to `max(I)`, at which a photoinhibition model
/// is started from its fitted light-saturated partner.
const NESTED_SCALE: f64 = 1e4;

fn nested_start(partner: &FitResult, data: &Dataset, heuristic: &ParameterVector) -> Vec<f64> {
    let big = NESTED_SCALE * data.max_irradiance();
    let get = |p| partner.params.get(p);
    heuristic
        .iter()
        .map(|(p, v)| match p {
            Param::Ps | Param::PMax => get(Param::PMax).unwrap_or(v),
            Param::IAlphaS | Param::IAlpha => get(Param::IAlpha).unwrap_or(v),
            Param::Theta => get(Param::Theta).unwrap_or(v),
            Param::IBeta | Param::IBetaS => big,
            Param::R => get(Param::R).unwrap_or(v),
            _ => v,
        })
        .collect()
}

/// Fits one model by minimizing the chosen criterion in transformed space.
pub fn fit_model(data: &Dataset, model: ModelId, options: &FitOptions) -> Result<FitResult> {
    let partner = match model.reduction_partner() {
        Some(ls) => fit_model(data, ls, options).ok(),
        None => None,
    };
    fit_with_partner(data, model, options, partner.as_ref())
}

pub(crate) fn fit_with_partner(
    data: &Dataset,
    model: ModelId,
    options: &FitOptions,
    partner: Option<&FitResult>,
) -> Result<FitResult> {
    options.check()?;
    let k = model.roster(options.respiration).len();
    if data.len() <= k {
        return Err(Error::Underdetermined { n: data.len(), k });
    }
    data.ensure_valid()?;

    let transform = options.transform_for(model)?;
    let problem = Problem {
        model,
        data,
        transform,
        options,
    };
    let heuristic = start_features(data, options.respiration)?.for_model(model, options.respiration);
    let base = heuristic.values();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut natural_starts = vec![base.clone()];
    for _ in 0..options.restarts {
        natural_starts.push(jitter(&base, problem.transform.names(), &mut rng));
    }
    if let Some(p) = partner.filter(|p| Some(p.model) == model.reduction_partner()) {
        natural_starts.push(nested_start(p, data, &heuristic));
    }

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut iterations = 0;
    let mut starts = 0;
    for s in &natural_starts {
        let Ok(u0) = problem.transform.forward_values(s) else {
            continue;
        };
        let Ok((u, value, iters, converged)) = problem.minimize(&u0) else {
            continue;
        };
        starts += 1;
        iterations += iters;
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((u, value, converged));
        }
    }
    let (u, objective_value, converged) = best.ok_or(Error::AllStartsFailed(model))?;

    let params = problem.transform.untransform(&u);
    let sse = problem.sse_at(&u);
    let n = data.len();
    let floored = nll_from_sse(sse, n).floored;
    let mut notes = Vec::new();
    if floored && options.criterion == Criterion::Mle {
        notes.push("residual variance floored in the likelihood".to_string());
    }
    let derived = match model.derive_quantities(&params) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    if !converged {
        notes.push(format!(
            "simplex did not reach the objective tolerance within {} iterations",
            options.max_iterations
        ));
    }
    Ok(FitResult {
        model,
        dataset_id: data.id.clone(),
        params,
        criterion: options.criterion,
        respiration: options.respiration,
        objective_value,
        sse,
        sigma2_hat: sse / n as f64,
        sigma2_floored: floored,
        converged,
        iterations,
        starts,
        n,
        k,
        derived,
        transformed: u,
        transform: problem.transform,
        notes,
    })
}

/// Outcome of one model within [`fit_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub model: ModelId,
    pub result: Result<FitResult>,
}

impl ModelFit {
    pub fn ok(&self) -> Option<&FitResult> {
        self.result.as_ref().ok()
    }
}

fn r2_key(fit: &FitResult, sst: f64) -> f64 {
    if sst > 0.0 {
        1.0 - fit.sse / sst
    } else {
        -fit.sse
    }
}

/// Orders successful fits by descending R², then ascending parameter count,
/// then registry order; failures follow in registry order.
pub fn rank_fits(fits: &mut [ModelFit], data: &Dataset) {
    let sst = total_sum_of_squares(&data.rate);
    fits.sort_by(|a, b| match (&a.result, &b.result) {
        (Ok(x), Ok(y)) => r2_key(y, sst)
            .total_cmp(&r2_key(x, sst))
            .then(x.k.cmp(&y.k))
            .then(x.model.cmp(&y.model)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.model.cmp(&b.model),
    });
}

pub fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Fits every model with identical options and seed. Light-saturated fits
/// run first so photoinhibition models can also start from their nested
/// partner. Fails only when every model fails.
pub fn fit_all(data: &Dataset, options: &FitOptions) -> Result<Vec<ModelFit>> {
    data.ensure_valid()?;
    let (first, second): (Vec<ModelId>, Vec<ModelId>) = ModelId::ALL
        .into_iter()
        .partition(|m| m.reduction_partner().is_none());
    let mut fits: Vec<ModelFit> = first
        .par_iter()
        .map(|&model| ModelFit {
            model,
            result: fit_with_partner(data, model, options, None),
        })
        .collect();
    let more: Vec<ModelFit> = second
        .par_iter()
        .map(|&model| {
            let partner = model
                .reduction_partner()
                .and_then(|ls| fits.iter().find(|f| f.model == ls))
                .and_then(|f| f.ok());
            ModelFit {
                model,
                result: fit_with_partner(data, model, options, partner),
            }
        })
        .collect();
    fits.extend(more);
    if fits.iter().all(|f| f.result.is_err()) {
        return Err(Error::AllModelsFailed);
    }
    rank_fits(&mut fits, data);
    Ok(fits)
}
