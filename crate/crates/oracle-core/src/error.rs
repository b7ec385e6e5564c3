use thiserror::Error;

/// Errors shared by every solver in the workspace.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: String,
        iterations: usize,
        residual: f64,
    },

    #[error("divergence detected in {0}")]
    Divergence(String),

    #[error("negative curvature detected: {0}")]
    NegativeCurvature(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        source: Box<OptError>,
    },
}

impl OptError {
    /// Wraps the error with a short description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        OptError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any context wrappers.
    pub fn root(&self) -> &OptError {
        match self {
            OptError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, OptError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(OptError::DimensionMismatch { expected, got })
    }
}
