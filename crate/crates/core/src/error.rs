use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("eigensolver did not converge on a {0}x{0} matrix")]
    EigenNonConvergence(usize),

    #[error("no point satisfies the residual cap {cap:.3e} (best residual {best_residual:.3e})")]
    Infeasible { cap: f64, best_residual: f64 },

    #[error("rejection sampling budget exhausted after {attempts} draws ({accepted} of {requested} accepted)")]
    BudgetExhausted {
        attempts: usize,
        accepted: usize,
        requested: usize,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
