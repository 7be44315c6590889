use thiserror::Error;

use crate::glasso::GlassoSolution;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the estimation pipeline and the wire protocol.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The solver ran out of sweeps. Carries the best (non-certified)
    /// iterate so callers can inspect how close it got.
    #[error("solver hit the sweep limit ({} sweeps, kkt residual {:.3e})", best.iterations, best.kkt_residual)]
    MaxIterationsExceeded { best: Box<GlassoSolution> },

    #[error("duplicate machine id {0}")]
    DuplicateMachine(u32),

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("timed out{}", match machine_id { Some(id) => format!(" waiting on machine {id}"), None => String::new() })]
    Timeout { machine_id: Option<u32> },

    #[error("connection failed: {0}")]
    ConnectionFailed(String),

    /// Wraps a failure with the trial it happened in.
    #[error("trial {trial}: {source}")]
    Trial { trial: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
