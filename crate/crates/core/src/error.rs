use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("chain is reducible: states {unreachable:?} cannot be reached from state {from}")]
    Reducible {
        from: usize,
        unreachable: Vec<usize>,
    },

    #[error("numerical failure: {what} (residual {residual:e})")]
    Numerical { what: String, residual: f64 },

    #[error(
        "mixing did not reach epsilon {epsilon} within {t_max} steps (d(t_max) = {distance:e})"
    )]
    Divergence {
        epsilon: f64,
        t_max: usize,
        distance: f64,
    },

    #[error("bound is infinite: {0}")]
    InfiniteBound(String),

    #[error("exact enumeration over 2^{n} sign vectors exceeds the cutoff 2^{cutoff}")]
    EnumerationBudget { n: usize, cutoff: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
