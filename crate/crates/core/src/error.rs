use thiserror::Error;

/// Every failure the solver can report. Variants carry a short
/// human-readable explanation; callers match on the kind.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain of a function (negative or zero
    /// argument, unsupported order, unattainable accuracy, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Curve parameters that do not describe a valid curve.
    #[error("invalid geometry: {0}")]
    Geometry(String),
    /// The mesh cannot represent the requested discretization.
    #[error("mesh error: {0}")]
    Mesh(String),
    /// A root search could not bracket or converge.
    #[error("root search failed: {0}")]
    Bracket(String),
    /// Inputs violate the documented preconditions of an operation.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The curve does not satisfy the hypotheses an experiment relies on.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    /// An iterative method stalled or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
