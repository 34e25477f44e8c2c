use thiserror::Error;

pub type Result<T> = std::result::Result<T, KahlerError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KahlerError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class {coeffs:?} is not in the Kähler cone of the model")]
    NotKahler { coeffs: Vec<f64> },

    #[error("canonical class is not nef on this model")]
    CanonicalNotNef,

    /// The metric failed the positivity floor at `point`.
    #[error("degenerate metric at {point:?}: minimum eigenvalue {min_eigenvalue:e}")]
    DegenerateMetric {
        point: Vec<f64>,
        min_eigenvalue: f64,
    },

    #[error("finite-difference stencil leaves the chart domain at {point:?}")]
    StencilOutOfDomain { point: Vec<f64> },

    #[error("holomorphic direction is zero")]
    ZeroDirection,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        damping: Vec<f64>,
    },

    #[error("rejected: {0}")]
    Rejected(String),
}

impl KahlerError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }
}
