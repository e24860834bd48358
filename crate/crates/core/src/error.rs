use thiserror::Error;

pub type Result<T> = std::result::Result<T, DogmError>;

#[derive(Debug, Error)]
pub enum DogmError {
    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transition matrix row {row} is not a distribution (sum {sum}, min {min})")]
    NonStochastic { row: usize, sum: f64, min: f64 },

    #[error("degenerate Bayesian normaliser {value:e} at cell ({i}, {j})")]
    DegenerateUpdate { i: usize, j: usize, value: f64 },

    #[error("detection {index} violates sensor limits: {reason}")]
    DetectionOutOfLimits { index: usize, reason: String },

    #[error("malformed {format} data at byte offset {offset}: {reason}")]
    Format {
        format: &'static str,
        offset: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DogmError {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        DogmError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
