use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time window {window_s:.3e} s too small: need at least {required_s:.3e} s ({what})")]
    WindowTooSmall {
        window_s: f64,
        required_s: f64,
        what: &'static str,
    },

    #[error("signal is identically zero")]
    ZeroSignal,

    #[error("empty band: no bins with |Δω| <= {band_limit:.3e} rad/s")]
    EmptyBand { band_limit: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
