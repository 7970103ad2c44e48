//! Crate-wide error type.

use thiserror::Error;

use crate::policy::Policy;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible constraint: effective fairness level {v_eff} exceeds 1/K = {cap}")]
    InfeasibleConstraint { v_eff: f64, cap: f64 },

    #[error("dual ascent stopped after {iterations} iterations with duality gap {gap:.3e} above tolerance")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        /// Best feasible iterate found before giving up.
        best: Box<Policy>,
    },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("unobserved cell: arm {arm}, context {context}")]
    EmptyCell { arm: usize, context: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
