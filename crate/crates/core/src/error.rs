use std::fmt;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Standardize,
    Screening,
    Selection,
    Refit,
    Instrument,
    Smoothing,
    Estimation,
    Prediction,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Standardize => "standardize",
            Stage::Screening => "screening",
            Stage::Selection => "selection",
            Stage::Refit => "refit",
            Stage::Instrument => "instrument",
            Stage::Smoothing => "smoothing",
            Stage::Estimation => "estimation",
            Stage::Prediction => "prediction",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("column `{0}` has zero norm and cannot be standardized")]
    ZeroColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simplex iteration cap of {cap} exceeded")]
    IterationLimit { cap: usize, best_iterate: Vec<f64> },

    #[error("linear program reported {0}; the Dantzig constraint set should always be feasible, this indicates numerical trouble")]
    LpFailure(String),

    #[error("no coefficient reaches the threshold {tau:e}; lower tau (kappa) so at least one predictor is selected")]
    EmptySelection { tau: f64 },

    #[error("selected design is rank deficient; collinear columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("no adjustment direction: every singular value of the cross-covariance is below the rank threshold, the submodel is unbiased at sample resolution")]
    NoAdjustmentDirection,

    #[error(
        "selected predictors are not identifiable given the adjustment variable (smallest eigenvalue of S_n = {0:e})"
    )]
    NotIdentifiable(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source} (hint: {hint})")]
    Stage {
        stage: Stage,
        hint: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage, hint: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                hint,
                source: Box::new(e),
            },
        }
    }

    /// Stage tag, when the error came out of the fitting pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}
