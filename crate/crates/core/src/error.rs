use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("POVM completeness violated: ‖ΣM†M − I‖ = {residual:.3e} (tolerance {tol:.1e})")]
    Incomplete { residual: f64, tol: f64 },

    #[error("detailed balance violated for channel `{channel}`: residual {residual:.3e}")]
    DetailedBalance { channel: String, residual: f64 },

    #[error("time reversal: {0}")]
    TimeReversal(String),

    #[error("step too large at t = {time}: event probability {probability:.4} exceeds the cap {cap}; reduce dt")]
    StepTooLarge { time: f64, probability: f64, cap: f64 },

    #[error("norm grew from {before:.6e} to {after:.6e} under non-Hermitian evolution")]
    NormIncrease { before: f64, after: f64 },

    #[error("all outcome probabilities fall below the floor (degenerate state)")]
    DegenerateMeasurement,

    #[error("unreachable outcome history: {0}")]
    UnreachableHistory(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { location: location.into(), message: message.into() }
    }

    /// Problems that a corrected input document would fix.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Incomplete { .. }
                | Error::DetailedBalance { .. }
                | Error::Dimension(_)
                | Error::NotHermitian(_)
                | Error::InvalidState(_)
                | Error::TimeReversal(_)
                | Error::StepTooLarge { .. }
                | Error::Unsupported(_)
        )
    }
}
