use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative kernel gave up. `residual` is the last monitored quantity.
    #[error("{op} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure in {op}: {msg}")]
    Numerical { op: &'static str, msg: String },

    #[error("velocity transport failed at the {side} offset: {source}")]
    Transport {
        side: TransportSide,
        #[source]
        source: Box<Error>,
    },

    #[error("fit failed on subinterval {index} [{t0}, {t1}]: {source}; consider sampling more densely")]
    Subinterval {
        index: usize,
        t0: f64,
        t1: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("Riemannian log to the chart center failed for samples {indices:?}")]
    LogFailures { indices: Vec<usize> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed report: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportSide {
    Forward,
    Backward,
}

impl std::fmt::Display for TransportSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportSide::Forward => f.write_str("+h"),
            TransportSide::Backward => f.write_str("-h"),
        }
    }
}

impl Error {
    /// True when the failure is an iterative non-convergence, possibly wrapped.
    pub fn is_convergence_failure(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::LogFailures { .. } => true,
            Error::Transport { source, .. } | Error::Subinterval { source, .. } => {
                source.is_convergence_failure()
            }
            _ => false,
        }
    }
}
