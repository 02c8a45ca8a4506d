use thiserror::Error;

/// Errors raised while building weights, rules, or sharp constants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The weight description is malformed or violates a family invariant.
    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    /// A caller-supplied argument is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The closed-form recurrence is not available for this family.
    #[error("no closed-form recurrence for family `{0}`; use the Stieltjes procedure")]
    UnsupportedFamily(String),

    /// The quadrature rule cannot resolve the requested integrals.
    #[error("quadrature insufficient: {0}")]
    QuadratureInsufficient(String),

    /// An iterative kernel hit its iteration cap.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Cholesky factorization failed.
    #[error("B not positive definite")]
    NotPositiveDefinite,

    /// A matrix expected to be symmetric is not.
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    /// A hypothesis of one of the theorem cases does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

impl Error {
    /// True for errors caused by the weight or case description rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidWeight(_)
                | Error::InvalidArgument(_)
                | Error::UnsupportedFamily(_)
                | Error::Hypothesis(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
