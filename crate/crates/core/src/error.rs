use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbeError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported polygamma order {0}; supported orders are 0, 1 and 2")]
    UnsupportedOrder(u32),

    #[error("unsupported derivative order {0}; supported orders are 0 to 3")]
    UnsupportedDerivative(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("root finder did not converge: {0}")]
    Convergence(String),

    #[error("monotonicity violation: {0}")]
    MonotonicityViolation(String),
}

pub type Result<T> = std::result::Result<T, CbeError>;

impl CbeError {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            CbeError::Domain(_)
                | CbeError::UnsupportedOrder(_)
                | CbeError::UnsupportedDerivative(_)
                | CbeError::InvalidParameter(_)
        )
    }
}
