use thiserror::Error;

/// Errors raised by the solvers and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} did not converge (last residual {residual:.3e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("no sign change for {what} in [{lo:.6e}, {hi:.6e}]")]
    Bracket { what: &'static str, lo: f64, hi: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("empty neutral curve")]
    EmptyCurve,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
