use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("demand {value} outside [{lower}, {upper}]")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("invalid problem:\n{0}")]
    Validation(ValidationReport),

    #[error("invalid noise: {0}")]
    Noise(String),

    #[error("optimizer found no finite maximum (last d_s={d_s}, d_l={d_l}, J={value})")]
    NonConvergence { d_s: f64, d_l: f64, value: f64 },

    #[error("period {t}, inventory {inventory}: {source}")]
    AtState {
        t: usize,
        inventory: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid: {0}")]
    Grid(String),

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("instance too large for brute force: {0}")]
    SizeGuard(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the root cause is optimizer non-convergence.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::AtState { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}
