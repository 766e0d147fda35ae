use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular (smallest singular value {smallest_singular_value:e})")]
    SingularMatrix { smallest_singular_value: f64 },

    #[error("fBm kernel evaluated on the diagonal u = v = {0}")]
    SingularKernel(f64),

    #[error("covariance of size {size} exceeds the exact-assembly cap {cap}; use the Riemann oracle instead")]
    SizeLimit { size: usize, cap: usize },

    #[error("covariance is not positive semi-definite after jitter {jitter:e}")]
    NotPsd { jitter: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite state at step {step}")]
    Divergence { step: usize },

    #[error("stability condition violated: lhs {lhs} >= rhs {rhs}")]
    StabilityCondition { lhs: f64, rhs: f64 },

    #[error("no positive root: {0}")]
    NoRoot(String),

    #[error("truncation window too short: tail bound {tail_bound:e} exceeds {limit:e}")]
    TailBound { tail_bound: f64, limit: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("run failed: {0}")]
    RunFailure(String),

    #[error("malformed noise file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the user's configuration rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidInput(_) | Error::GridMismatch(_) | Error::SizeLimit { .. }
        )
    }
}
