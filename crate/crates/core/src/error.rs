use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("level {level} outside the working domain: {reason}")]
    Domain { level: f64, reason: String },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("Laplace exponent pole at s = {0}")]
    Pole(f64),

    #[error("numerical overflow while evaluating {0}")]
    Overflow(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("ODE solver failed: {0}")]
    Ode(String),

    #[error("Sturm-Liouville residual {residual:e} above tolerance {tolerance:e} after refinement")]
    Residual { residual: f64, tolerance: f64 },

    #[error("discount rate {q} below the minimum {q_min} supported by the jump kernel")]
    SmallDiscount { q: f64, q_min: f64 },

    #[error("ill-conditioned two-sided exit system at u = {u}: determinant {det:e}")]
    IllConditioned { u: f64, det: f64 },

    #[error("finite-difference step failure at x = {x}: relative disagreement {disagreement:e}")]
    StepSize { x: f64, disagreement: f64 },

    #[error("integral of b diverges near {0}")]
    Divergent(f64),

    #[error("query mismatch: {0}")]
    Query(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
