//! Analysis-ready outputs: long-format ("tidy") tables and the JSON results
//! document.
//!
//! Tidy rows are keyed by (dataset, model, quantity). Each fit contributes
//! one row per free parameter followed by seven statistic rows. A value
//! that cannot be reported is written as null together with a reason code.
//! Statistic rows never carry a standard error or interval.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::data::{format_number, Dataset};
use crate::error::{Error, Result};
use crate::fit::{Criterion, FitResult, ModelFit};
use crate::inference::{
    information_criteria, infer, r_squared, CriteriaSet, Inference, RSquared,
};
use crate::model::ModelId;

/// Identifies the layout of [`results_json`] output.
pub const RESULTS_SCHEMA: &str = "pifit.results";
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const STATISTICS: [&str; 7] = ["sse", "r2", "adj_r2", "aic", "aicc", "bic", "converged"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    /// The fit failed outright; no estimates exist.
    NotConverged,
    /// The fit returned an estimate but the simplex hit its iteration cap.
    IterationLimit,
    /// Standard errors could not be computed (bad Hessian or covariance).
    NoStandardError,
    /// The covariance is a pseudo-inverse of an ill-conditioned Hessian.
    PseudoInverse,
    ConstantResponse,
    /// Too few observations for the quantity (adjusted R², AICc).
    TooFewPoints,
    NonFinite,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::NotConverged => "not-converged",
            Reason::IterationLimit => "iteration-limit",
            Reason::NoStandardError => "no-standard-error",
            Reason::PseudoInverse => "pseudo-inverse",
            Reason::ConstantResponse => "constant-response",
            Reason::TooFewPoints => "too-few-points",
            Reason::NonFinite => "non-finite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Parameter,
    Statistic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TidyRow {
    pub dataset: String,
    pub model: ModelId,
    pub quantity: String,
    pub kind: RowKind,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub reason: Option<Reason>,
}

/// Everything reported about one (dataset, model) fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub dataset_id: String,
    pub model: ModelId,
    pub level: f64,
    pub fit: Result<FitResult>,
    /// Present when the fit succeeded.
    pub inference: Option<Result<Inference>>,
    pub criteria: Option<CriteriaSet>,
    pub r_squared: Option<Result<RSquared>>,
}

impl FitReport {
    pub fn new(data: &Dataset, model: ModelId, fit: Result<FitResult>, level: f64) -> Self {
        let (inference, criteria, r2) = match &fit {
            Ok(f) => (
                Some(infer(f, data, level)),
                Some(information_criteria(f)),
                Some(r_squared(f, data)),
            ),
            Err(_) => (None, None, None),
        };
        FitReport {
            dataset_id: data.id.clone(),
            model,
            level,
            fit,
            inference,
            criteria,
            r_squared: r2,
        }
    }

    pub fn from_model_fits(data: &Dataset, fits: Vec<ModelFit>, level: f64) -> Vec<FitReport> {
        fits.into_iter()
            .map(|m| FitReport::new(data, m.model, m.result, level))
            .collect()
    }
}

fn finite(x: f64) -> (Option<f64>, Option<Reason>) {
    if x.is_finite() {
        (Some(x), None)
    } else {
        (None, Some(Reason::NonFinite))
    }
}

fn stat_row(r: &FitReport, name: &str, value: (Option<f64>, Option<Reason>)) -> TidyRow {
    TidyRow {
        dataset: r.dataset_id.clone(),
        model: r.model,
        quantity: name.to_string(),
        kind: RowKind::Statistic,
        estimate: value.0,
        se: None,
        lower: None,
        upper: None,
        reason: value.1,
    }
}

fn rows_for(r: &FitReport, respiration: bool) -> Result<Vec<TidyRow>> {
    let mut rows = Vec::new();
    let fit = match &r.fit {
        Ok(f) => f,
        Err(_) => {
            for p in r.model.roster(respiration) {
                rows.push(TidyRow {
                    dataset: r.dataset_id.clone(),
                    model: r.model,
                    quantity: p.as_str().to_string(),
                    kind: RowKind::Parameter,
                    estimate: None,
                    se: None,
                    lower: None,
                    upper: None,
                    reason: Some(Reason::NotConverged),
                });
            }
            for s in STATISTICS {
                rows.push(stat_row(r, s, (None, Some(Reason::NotConverged))));
            }
            return Ok(rows);
        }
    };
    if fit.model != r.model || fit.dataset_id != r.dataset_id {
        return Err(Error::Mismatch(format!(
            "report for {}/{} holds a fit of {}/{}",
            r.dataset_id, r.model, fit.dataset_id, fit.model
        )));
    }
    let inference = r.inference.as_ref().and_then(|i| i.as_ref().ok());
    if let Some(inf) = inference {
        if inf.intervals.intervals.len() != fit.params.len()
            || inf.intervals.intervals.iter().zip(fit.params.names()).any(|(i, p)| i.name != p)
        {
            return Err(Error::Mismatch(format!(
                "intervals do not match the parameters of {}",
                fit.model
            )));
        }
    }
    let caveat = if !fit.converged {
        Some(Reason::IterationLimit)
    } else {
        match inference {
            None => Some(Reason::NoStandardError),
            Some(i) if i.covariance.pseudo_inverted => Some(Reason::PseudoInverse),
            Some(_) => None,
        }
    };
    for (k, (p, v)) in fit.params.iter().enumerate() {
        let ci = inference.map(|i| &i.intervals.intervals[k]);
        let keep = |x: f64| x.is_finite().then_some(x);
        let (estimate, bad) = finite(v);
        rows.push(TidyRow {
            dataset: r.dataset_id.clone(),
            model: r.model,
            quantity: p.as_str().to_string(),
            kind: RowKind::Parameter,
            estimate,
            se: ci.and_then(|c| keep(c.se)),
            lower: ci.and_then(|c| keep(c.lower)),
            upper: ci.and_then(|c| keep(c.upper)),
            reason: bad.or(caveat).or_else(|| {
                ci.filter(|c| !(c.se.is_finite() && c.lower.is_finite() && c.upper.is_finite()))
                    .map(|_| Reason::NonFinite)
            }),
        });
    }
    let crit = r.criteria.unwrap_or_else(|| information_criteria(fit));
    let (r2, adj) = match &r.r_squared {
        Some(Ok(q)) => (
            finite(q.r2),
            q.adjusted.map_or((None, Some(Reason::TooFewPoints)), finite),
        ),
        Some(Err(Error::ConstantResponse)) => (
            (None, Some(Reason::ConstantResponse)),
            (None, Some(Reason::ConstantResponse)),
        ),
        _ => ((None, Some(Reason::NonFinite)), (None, Some(Reason::NonFinite))),
    };
    rows.push(stat_row(r, "sse", finite(fit.sse)));
    rows.push(stat_row(r, "r2", r2));
    rows.push(stat_row(r, "adj_r2", adj));
    rows.push(stat_row(r, "aic", finite(crit.aic)));
    rows.push(stat_row(
        r,
        "aicc",
        if crit.aicc_defined {
            finite(crit.aicc)
        } else {
            (None, Some(Reason::TooFewPoints))
        },
    ));
    rows.push(stat_row(r, "bic", finite(crit.bic)));
    rows.push(stat_row(
        r,
        "converged",
        (Some(if fit.converged { 1.0 } else { 0.0 }), None),
    ));
    Ok(rows)
}

/// Long-format rows ordered by dataset, then model registry order, then
/// parameter roster followed by the statistics.
pub fn tidy(reports: &[FitReport]) -> Result<Vec<TidyRow>> {
    let mut order: Vec<&FitReport> = reports.iter().collect();
    order.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id).then(a.model.cmp(&b.model)));
    for w in order.windows(2) {
        if w[0].dataset_id == w[1].dataset_id && w[0].model == w[1].model {
            return Err(Error::Mismatch(format!(
                "duplicate report for {}/{}",
                w[0].dataset_id, w[0].model
            )));
        }
    }
    let mut rows = Vec::new();
    for r in order {
        let respiration = match &r.fit {
            Ok(f) => f.respiration,
            Err(_) => false,
        };
        rows.extend(rows_for(r, respiration)?);
    }
    Ok(rows)
}

fn cell(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub const TIDY_HEADER: [&str; 9] = [
    "dataset", "model", "quantity", "kind", "estimate", "se", "lower", "upper", "reason",
];

/// Tidy rows as CSV; null values are empty cells.
pub fn write_tidy_csv<W: Write>(rows: &[TidyRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TIDY_HEADER)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.model.as_str().to_string(),
            r.quantity.clone(),
            match r.kind {
                RowKind::Parameter => "parameter".into(),
                RowKind::Statistic => "statistic".into(),
            },
            cell(r.estimate),
            cell(r.se),
            cell(r.lower),
            cell(r.upper),
            r.reason.map(|x| x.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Finite numbers as JSON numbers, everything else as null.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn fit_json(r: &FitReport) -> Value {
    let fit = match &r.fit {
        Ok(f) => f,
        Err(e) => {
            return json!({
                "dataset": r.dataset_id,
                "model": r.model.as_str(),
                "status": "failed",
                "error": e.to_string(),
            })
        }
    };
    let inference = r.inference.as_ref().and_then(|i| i.as_ref().ok());
    let mut params = Map::new();
    for (k, (p, v)) in fit.params.iter().enumerate() {
        let ci = inference.map(|i| &i.intervals.intervals[k]);
        params.insert(
            p.as_str().to_string(),
            json!({
                "estimate": num(v),
                "se": ci.map_or(Value::Null, |c| num(c.se)),
                "lower": ci.map_or(Value::Null, |c| num(c.lower)),
                "upper": ci.map_or(Value::Null, |c| num(c.upper)),
            }),
        );
    }
    let crit = r.criteria.unwrap_or_else(|| information_criteria(fit));
    let (r2, adj) = match &r.r_squared {
        Some(Ok(q)) => (num(q.r2), q.adjusted.map_or(Value::Null, num)),
        _ => (Value::Null, Value::Null),
    };
    let derived = fit.derived.map_or(Value::Null, |d| {
        json!({
            "p_max": num(d.p_max),
            "i_beta": num(d.i_beta),
            "alpha": num(d.alpha),
            "i_opt": num(d.i_opt),
        })
    });
    let constants: Map<String, Value> = fit
        .model
        .fixed_constants()
        .into_iter()
        .map(|(k, v)| (k.to_string(), num(v)))
        .collect();
    json!({
        "dataset": r.dataset_id,
        "model": fit.model.as_str(),
        "class": fit.model.class().as_str(),
        "status": "ok",
        "criterion": match fit.criterion { Criterion::Mse => "mse", Criterion::Mle => "mle" },
        "respiration": fit.respiration,
        "n": fit.n,
        "k": fit.k,
        "parameters": params,
        "constants": constants,
        "derived": derived,
        "statistics": {
            "objective": num(fit.objective_value),
            "sse": num(fit.sse),
            "sigma2": num(fit.sigma2_hat),
            "r2": r2,
            "adj_r2": adj,
            "aic": num(crit.aic),
            "aicc": num(crit.aicc),
            "bic": num(crit.bic),
            "k_ic": crit.k_ic,
        },
        "convergence": {
            "converged": fit.converged,
            "iterations": fit.iterations,
            "starts": fit.starts,
            "sigma2_floored": fit.sigma2_floored,
        },
        "covariance": match &r.inference {
            Some(Ok(i)) => json!({
                "condition_number": num(i.info.condition_number),
                "pseudo_inverted": i.covariance.pseudo_inverted,
            }),
            Some(Err(e)) => json!({ "error": e.to_string() }),
            None => Value::Null,
        },
        "notes": fit.notes,
    })
}

/// Versioned JSON document with one object per fit.
pub fn results_json(reports: &[FitReport], level: f64) -> Value {
    json!({
        "schema": RESULTS_SCHEMA,
        "version": RESULTS_SCHEMA_VERSION,
        "level": level,
        "fits": reports.iter().map(fit_json).collect::<Vec<_>>(),
    })
}
