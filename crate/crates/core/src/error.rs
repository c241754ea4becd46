use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error)]
pub enum MftError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {left} intervals vs {right} intervals")]
    GridMismatch { left: usize, right: usize },

    #[error("grid too small: need at least {need} intervals, got {got}")]
    GridTooSmall { need: usize, got: usize },

    #[error("profile leaves the admissible class: {0}")]
    NotAdmissible(String),

    #[error("root bracketing failed on ({lo}, {hi}): {reason}")]
    Bracketing { lo: f64, hi: f64, reason: String },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("singular linear system at row {0}")]
    Singular(usize),

    #[error("stability condition violated: {0}")]
    Stability(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MftError {
    /// True for failures of an iterative or time-stepping method, as opposed
    /// to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MftError::NoConvergence { .. }
                | MftError::Bracketing { .. }
                | MftError::Singular(_)
                | MftError::Stability(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, MftError>;
