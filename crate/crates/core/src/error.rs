use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("parse error at {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("map is not piecewise constant")]
    NotPiecewiseConstant,

    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    #[error("problem too large for exhaustive evaluation: {0}")]
    TooLarge(String),

    #[error("degenerate optimum: more than {cap} optimal vertex plans")]
    DegenerateExplosion { cap: usize },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
