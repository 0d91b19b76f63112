use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("point is not in the open upper half-plane (im = {im})")]
    BoundaryPoint { im: f64 },

    #[error("degenerate triangle (aspect ratio {aspect:e})")]
    DegenerateTriangle { aspect: f64 },

    #[error("base point kind mismatch: generator expects {expected}, got {got}")]
    BasePointMismatch { expected: &'static str, got: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank collapse at step {step} (diagonal index {index})")]
    RankCollapse { step: u64, index: usize },

    #[error("cycle is not invariant: point {index} is {distance:e} away from the set")]
    NonInvariantCycle { index: usize, distance: f64 },

    #[error("unsupported base dynamics: {0}")]
    UnsupportedBase(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error comes from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Singular { .. }
                | Error::DegenerateTriangle { .. }
                | Error::RankCollapse { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
