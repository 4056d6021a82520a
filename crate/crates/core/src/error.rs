use thiserror::Error;

use crate::data::Violation;
use crate::model::ModelId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("model {model}: parameter roster mismatch (expected {expected}, got {got})")]
    Roster {
        model: ModelId,
        expected: String,
        got: String,
    },

    #[error("model {model}: parameter {name} = {value} is invalid ({reason})")]
    InvalidParameter {
        model: ModelId,
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("irradiance must be finite and non-negative, got {0}")]
    InvalidIrradiance(f64),

    #[error("model {model}: negative discriminant at irradiance {irradiance}")]
    NegativeDiscriminant { model: ModelId, irradiance: f64 },

    #[error("evaluation failed at grid index {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model {model}: maximization of the gross curve did not converge ({reason})")]
    Maximization { model: ModelId, reason: String },

    #[error("value {value} is outside the domain of the {kind} transform for {name}")]
    TransformDomain {
        name: &'static str,
        kind: &'static str,
        value: f64,
    },

    #[error("invalid dataset: {}", format_violations(.0))]
    InvalidDataset(Vec<Violation>),

    #[error("fewer than {needed} distinct low-irradiance levels for start values")]
    TooFewLowLightPoints { needed: usize },

    #[error("under-determined fit: n = {n} observations for k = {k} parameters")]
    Underdetermined { n: usize, k: usize },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("model {0}: every start produced a non-finite objective")]
    AllStartsFailed(ModelId),

    #[error("every model failed to fit")]
    AllModelsFailed,

    #[error("information matrix entry ({row}, {col}) is not finite")]
    NonFiniteHessian { row: usize, col: usize },

    #[error("covariance diagonal entry {0} is negative")]
    NegativeVariance(usize),

    #[error("prediction variance is negative at grid index {0}")]
    NegativeBandVariance(usize),

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("response is constant; total sum of squares is zero")]
    ConstantResponse,

    #[error("fit and interval inputs do not refer to the same fits: {0}")]
    Mismatch(String),

    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),

    #[error("irradiance grid must be finite, non-negative and sorted")]
    InvalidGrid,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input data or options.
    Validation,
    /// The optimizer or the post-fit numerics failed.
    Convergence,
    Internal,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            UnknownModel(_) | Roster { .. } | InvalidParameter { .. } | InvalidIrradiance(_)
            | InvalidDataset(_) | TooFewLowLightPoints { .. } | Underdetermined { .. }
            | InvalidLevel(_) | ConstantResponse | GridTooSmall(_) | InvalidGrid | Empty(_)
            | MissingColumn(_) | Csv(_) | InvalidOption(_) => ErrorCategory::Validation,
            NonFiniteStart | AllStartsFailed(_) | AllModelsFailed | Maximization { .. }
            | NonFiniteHessian { .. } | NegativeVariance(_) | NegativeBandVariance(_) => {
                ErrorCategory::Convergence
            }
            AtIndex { source, .. } => source.category(),
            NegativeDiscriminant { .. } | TransformDomain { .. } | Mismatch(_) | Io(_) => {
                ErrorCategory::Internal
            }
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
