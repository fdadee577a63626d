use thiserror::Error;

/// Errors raised by the market model, the solvers and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An improper integral does not converge for the given parameters.
    #[error("divergent integral: {0}")]
    Divergence(String),

    /// The requested thresholds need a negative CP fee.
    #[error("thresholds ({x_t}, {y_t}) need a negative CP fee b = {b}")]
    InfeasibleThreshold { x_t: f64, y_t: f64, b: f64 },

    /// A two-channel split violates the pay-channel speed constraint.
    #[error("channel split violates the speed ordering: {0}")]
    ConstraintViolation(String),

    /// The operation does not support this parameter combination.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A precondition of a comparison or search does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A brute-force grid contained no admissible cell.
    #[error("no feasible grid cell")]
    EmptyFeasibleSet,

    /// A root could not be bracketed.
    #[error("root bracket failure: {0}")]
    RootBracket(String),

    /// The welfare transition search failed.
    #[error("transition search failed: {0}")]
    Search(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// A result broke an invariant that the theory guarantees.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InvalidParameter(_)
                | Error::Divergence(_)
                | Error::InfeasibleThreshold { .. }
                | Error::ConstraintViolation(_)
                | Error::Unsupported(_)
                | Error::Precondition(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
