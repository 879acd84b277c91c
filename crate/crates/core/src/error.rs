use thiserror::Error;

/// Errors raised by geometry validation, assembly and the eigensolvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mass operator is not positive definite (<Mx,x> = {0:e})")]
    NotPositiveDefinite(f64),

    #[error("unsupported section: {0}")]
    UnsupportedSection(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("eigensolver did not converge after {iterations} iterations ({converged}/{wanted} pairs)")]
    NotConverged {
        iterations: usize,
        converged: usize,
        wanted: usize,
    },

    #[error("mask parse error: {0}")]
    MaskParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
