use std::io;

use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum GvcError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("derived gross output is negative at node {node} ({value})")]
    NegativeOutput { node: usize, value: f64 },

    #[error("negative absorption probability at node {node} ({value}); value added below zero")]
    NegativeAbsorption { node: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("chain is not absorbing: spectral radius {radius} exceeds 1 - 1e-8")]
    NotAbsorbing { radius: f64 },

    #[error("transient mass vanished after t = {last_positive_t}")]
    Extinction { last_positive_t: usize },

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is reducible: node {index} is cut off from node 0 in the positive-entry graph")]
    Reducible { index: usize },

    #[error("kappa {kappa} is not below 1/lambda = {limit}")]
    Divergence { kappa: f64, limit: f64 },

    #[error("rank correlation undefined: zero rank variance")]
    UndefinedCorrelation,

    #[error("path {path} exceeded the step cap of {cap}")]
    PathCap { path: u64, cap: u64 },

    #[error("spectral target {target} could not be bracketed")]
    InfeasibleTarget { target: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GvcError> = std::result::Result<T, E>;
