use thiserror::Error;

/// Errors raised by the simulation and verification toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("orbit index {index} outside the representable range [{low}, {high})")]
    DepthExceeded { index: i64, low: i64, high: i64 },

    #[error("window-hit set has zero mass")]
    ZeroHitMass,

    #[error("event set at coordinates {coords:?} is not contained in the window-hit set of [{start}, {end})")]
    SupportViolation {
        coords: Vec<i64>,
        start: i64,
        end: i64,
    },

    #[error("small-jump variance {bound:.6e} exceeds tolerance {tolerance:.6e}; use a threshold of at most {suggested:.6e}")]
    SmallJumpBound {
        bound: f64,
        tolerance: f64,
        suggested: f64,
    },

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("spec is not integrable: {0}")]
    NotIntegrable(String),

    #[error("class mismatch: slot {slot} expects {expected}, got {found}")]
    ClassMismatch {
        slot: &'static str,
        expected: String,
        found: String,
    },

    #[error("missing cross integral for subset {0:?}")]
    MissingCrossIntegral(Vec<usize>),

    #[error("unsupported chaos order {0} (supported: 1..=4)")]
    UnsupportedOrder(usize),

    #[error("insufficient budget: {0}")]
    InsufficientBudget(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, IdpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> IdpError {
    IdpError::InvalidParameter(msg.into())
}
