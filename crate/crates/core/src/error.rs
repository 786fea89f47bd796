use thiserror::Error;

/// Failure modes shared by every layer of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("{what} did not converge after {terms} terms")]
    NonConvergence { what: String, terms: usize },

    #[error("invalid family: {0}")]
    Validity(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is indefinite (eigenvalue {eigenvalue:e})")]
    Indefinite { eigenvalue: f64 },

    #[error("singular scale matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {n}: {reason}")]
    Dimension { n: usize, reason: String },

    #[error("total degree {degree} exceeds the limit {limit}")]
    DegreeLimit { degree: u32, limit: u32 },

    #[error("non-finite value {value} at draw {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("operation requires a normal family, got {0}")]
    FamilyMismatch(String),

    #[error("moment of degree {degree} does not exist for {family}")]
    MomentNonexistence { degree: u32, family: String },

    #[error("regularity of f at infinity was not asserted by the caller")]
    RegularityNotAsserted,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
