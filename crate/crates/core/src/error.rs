use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, left is {}x{}, right is {}x{}", .left.0, .left.1, .right.0, .right.1)]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error(
        "monotonicity violated at iteration {iter}: objective went from {previous} to {current}"
    )]
    MonotonicityViolation {
        iter: usize,
        previous: f64,
        current: f64,
    },

    #[error("{what} has a negative entry at index {index}")]
    NegativeEntry { what: &'static str, index: usize },

    #[error("row {row} is constant; its standard deviation is zero")]
    ConstantRow { row: usize },

    #[error("entry {index} has a positive count but a zero expected value")]
    ZeroMean { index: usize },

    #[error("pixel {pixel} is not intersected by any ray")]
    UnidentifiablePixel { pixel: usize },

    #[error("intensity of pixel {pixel} is not positive ({value})")]
    NonPositiveIntensity { pixel: usize, value: f64 },

    #[error("negative discriminant {value} in the update of pixel {pixel}")]
    NegativeDiscriminant { pixel: usize, value: f64 },

    #[error("objects {i} and {j} coincide but carry positive weighted dissimilarity")]
    CoincidentPoints { i: usize, j: usize },

    #[error("legislators {i} and {j} share no roll call on which both voted")]
    NoSharedVotes { i: usize, j: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that indicate a numerical invariant was broken
    /// rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::MonotonicityViolation { .. }
                | Error::NonPositiveIntensity { .. }
                | Error::NegativeDiscriminant { .. }
                | Error::CoincidentPoints { .. }
                | Error::ZeroMean { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
