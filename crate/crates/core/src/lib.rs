//! Fitting, comparison, diagnosis and classification of
//! photosynthesis-irradiance (P-I) curves.
//!
//! The library holds 24 model formulations (one light-limited, seven
//! light-saturated, sixteen photoinhibited), fits them under a common
//! least-squares or Gaussian-likelihood criterion with a Nelder–Mead simplex
//! in transformed parameter space, and reports standard errors, Wald
//! intervals, information criteria and confidence bands.

// `!(x > 0.0)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod data;
pub mod transform;
pub mod optimize;
pub mod objective;
pub mod start;
pub mod fit;
pub mod inference;
pub mod classify;
pub mod synth;
pub mod examples;
pub mod report;
pub mod plot;

pub use error::{Error, ErrorCategory, Result};
pub use model::{list_models, DerivedQuantities, ModelClass, ModelId, ModelSpec, Param, ParameterVector};
pub use data::Dataset;
pub use fit::{fit_all, fit_model, Criterion, FitOptions, FitResult, ModelFit};
pub use inference::{
    conf_intervals, covariance, info_matrix, information_criteria, prediction_band, r_squared,
    recalc_ci, CriteriaSet, IntervalSet, PredictionBand,
};
pub use classify::{classify, classify_batch, ClassLabel, ClassSummary};
pub use data::{format_check, high_res_grid, load_csv, load_csv_path};
pub use examples::example_data;
pub use report::{tidy, FitReport, TidyRow};
