use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("truncation inadequate: tail population {tail:.3e} exceeds {tolerance:.1e}")]
    Truncation { tail: f64, tolerance: f64 },

    #[error("quadrature did not converge: error estimate {estimate:.3e} above tolerance {tolerance:.3e} after {evaluations} evaluations")]
    Quadrature {
        estimate: f64,
        tolerance: f64,
        evaluations: usize,
    },

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("insufficient coverage: {0}")]
    Coverage(String),

    #[error("aliasing: {fraction:.3e} of spectral mass lies near the Nyquist edge")]
    Aliasing { fraction: f64 },

    #[error("zero mean intensity")]
    ZeroIntensity,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
