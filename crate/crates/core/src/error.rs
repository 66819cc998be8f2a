//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the function domain")]
    Domain { point: Vec<f64> },

    #[error("point {point:?} lies on the boundary of the function domain")]
    DomainBoundary { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("gradient sampling failed: {0}")]
    Sampling(String),

    #[error("thickening eps = {eps} is not below the reference cap M = {cap}")]
    ThickeningCap { eps: f64, cap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("degree undefined: boundary margin {margin:e} at {point:?}")]
    DegreeUndefined { margin: f64, point: Vec<f64> },

    #[error("trajectory left the reference box at t = {t}: {point:?}")]
    Divergence { t: f64, point: Vec<f64> },

    #[error("viability lost at t = {t}: f = {value:e} at {point:?}")]
    Viability { t: f64, point: Vec<f64>, value: f64 },

    #[error("prerequisite unmet: {0}")]
    Prerequisite(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
