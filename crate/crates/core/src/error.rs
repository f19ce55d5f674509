use thiserror::Error;

use crate::engine::RunStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dimension {0} is outside the supported range 1..=8")]
    UnsupportedDimension(usize),

    #[error("coordinate {0} lies outside the unit interval")]
    CoordinateOutOfRange(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("box has zero volume")]
    DegenerateBox,

    #[error("precondition violated: {0}")]
    Precondition(&'static str),

    #[error("no bad-pair-free configuration after {} iterations", .stats.iterations)]
    IterationCapExceeded { stats: Box<RunStats> },

    #[error("classical rejection failed after {attempts} attempts")]
    AttemptCapExceeded { attempts: usize },

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(&'static str),

    #[error("empty sample")]
    EmptySample,

    #[error("grid of {cells_per_axis}^{dim} cells is too large")]
    GridTooLarge { cells_per_axis: usize, dim: usize },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
