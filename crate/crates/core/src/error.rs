use thiserror::Error;

/// Errors raised by the library. The CLI maps these onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },
    #[error("degenerate segment: endpoints coincide (use the point constructor)")]
    DegenerateSegment,
    #[error("mesh too large: n={n}, k={k} gives {simplices} simplices (limit {limit})")]
    MeshTooLarge {
        n: usize,
        k: usize,
        simplices: u128,
        limit: u128,
    },
    #[error("incompatible construction: {0}")]
    Incompatible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("density `{0}` has no exact evaluator; use float mode")]
    ExactUnsupported(String),
    #[error("map is not zero on the boundary; weak Morrey quasiconvexity only admits zero-boundary maps")]
    NotZeroBoundary,
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("parse error in `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(input: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
