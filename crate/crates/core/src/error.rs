use thiserror::Error;

/// Errors raised by the core toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("history samples must be strictly increasing: got t={t} after t={last}")]
    NonMonotone { last: f64, t: f64 },

    #[error("time {theta} outside the covered interval [{start}, {end}]")]
    OutOfRange { theta: f64, start: f64, end: f64 },

    #[error("insufficient coverage: need [{need_start}, {need_end}], have [{have_start}, {have_end}]")]
    Coverage {
        need_start: f64,
        need_end: f64,
        have_start: f64,
        have_end: f64,
    },

    #[error("delayed time is not invertible on [{lo}, {hi}]: {reason}")]
    NonInvertible { lo: f64, hi: f64, reason: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("closed-loop matrix A+BK is not Hurwitz (max real part {max_real})")]
    NotHurwitz { max_real: f64 },

    #[error("predictor diverged at x={x}")]
    Divergence { x: f64 },

    #[error("control law outside its domain: {0}")]
    Domain(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
