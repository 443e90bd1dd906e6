//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the toolkit. A single enum keeps the
/// cross-module plumbing simple; variants carry enough context to map onto
/// the CLI's exit-code contract (input error vs. verification failure vs.
/// numerical limit).
#[derive(Debug, Error)]
pub enum Error {
    /// Cholesky pivot failure: the matrix is not positive definite at the
    /// pinned pivot tolerance.
    #[error("matrix not positive definite: pivot {index} is {value:.6e}")]
    NotPositiveDefinite { index: usize, value: f64 },

    /// A query point lies outside the convex hull of the binary domain.
    #[error("query outside the domain hull: {0}")]
    QueryOutsideHull(String),

    /// A binary point was expected to belong to the domain but does not.
    #[error("point not in domain: {0}")]
    PointNotInDomain(String),

    /// Column-space normalization removed every domain point.
    #[error("normalization dropped every domain point (all radicands negative)")]
    EmptyDomainAfterRestriction,

    /// The continuous-block deviation matrix of a resource is not positive
    /// definite, so the cone reformulation of that resource does not exist.
    #[error("deviation matrix block over continuous items not positive definite (resource {resource})")]
    SigmaTildeNotPd { resource: usize },

    /// A quadratic row restricted to the continuous variables is not convex,
    /// so the continuous subproblem cannot be solved by the barrier method.
    #[error("continuous part of quadratic row {row} is not convex")]
    NonConvexContinuousPart { row: usize },

    /// A constraint cannot be rendered in the requested export format.
    #[error("constraint not representable in this format: {0}")]
    UnrepresentableConstraint(String),

    /// Malformed input: bad dimensions, out-of-range parameters, schema
    /// violations.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A solver or factorization hit an iteration cap or lost precision on
    /// otherwise well-formed input.
    #[error("numerical limit: {0}")]
    NumericalLimit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for dimension/range complaints.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
