use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MorlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MorlError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("objective vector must have at least one component")]
    EmptyVector,

    #[error("non-finite value {value} at component {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid action {action}: environment has {action_count} actions")]
    InvalidAction { action: usize, action_count: usize },

    #[error("invalid state {state}: environment has {state_count} states")]
    InvalidState { state: usize, state_count: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("{0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "pareto q-learning needs {pairs} state-action sets but the cap is {cap}; \
         set-valued tabular learning does not scale to this environment"
    )]
    StateCapExceeded { pairs: usize, cap: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl MorlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MorlError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(MorlError::DimensionMismatch { expected, found })
        }
    }
}
