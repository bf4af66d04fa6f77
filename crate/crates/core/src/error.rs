use num_complex::Complex64;
use thiserror::Error;

use crate::grid::MapField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite metric value at {point}")]
    MetricEvaluation { point: Complex64 },

    #[error("geodesic left the chart at t = {time}")]
    ChartExit { time: f64 },

    #[error("point {point} lies outside the chart")]
    OutsideChart { point: Complex64 },

    #[error("shooting did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    #[error("line search failed after {iterations} iterations (gradient norm {grad_norm:e})")]
    LineSearch {
        iterations: usize,
        grad_norm: f64,
        last: Box<MapField>,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("boundary traces differ (max deviation {deviation:e})")]
    TraceMismatch { deviation: f64 },

    #[error("boundary loops are incompatible: {0}")]
    LoopMismatch(String),

    #[error("continuation stalled at t = {t} after exhausting {bisections} bisections")]
    Continuation {
        t: f64,
        bisections: usize,
        state: Box<crate::homotopy::HomotopyState>,
    },

    #[error("jacobian is not positive at node {node} (J = {value:e})")]
    NonPositiveJacobian { node: usize, value: f64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("config parse error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
