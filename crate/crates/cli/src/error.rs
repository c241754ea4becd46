use mft_core::MftError;
use ssep_lattice::LatticeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{message}")]
    Numerical {
        message: String,
        diagnostic: serde_json::Value,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => 2,
            _ => 1,
        }
    }
}

impl From<MftError> for CliError {
    fn from(e: MftError) -> Self {
        if !e.is_numerical() {
            return match e {
                MftError::Io(io) => CliError::Io(io),
                other => CliError::Validation(other.to_string()),
            };
        }
        let diagnostic = match &e {
            MftError::NoConvergence {
                iterations,
                residual,
                history,
            } => serde_json::json!({
                "kind": "no_convergence",
                "iterations": iterations,
                "residual": residual,
                "history_tail": &history[history.len().saturating_sub(100)..],
            }),
            MftError::Bracketing { lo, hi, reason } => serde_json::json!({
                "kind": "bracketing",
                "lo": lo,
                "hi": hi,
                "reason": reason,
            }),
            MftError::Singular(row) => serde_json::json!({ "kind": "singular", "row": row }),
            other => serde_json::json!({ "kind": "stability", "detail": other.to_string() }),
        };
        CliError::Numerical {
            message: e.to_string(),
            diagnostic,
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Core(inner) => inner.into(),
            LatticeError::InvalidInput(msg) => CliError::Validation(msg),
            LatticeError::EventBudget { limit, time } => CliError::Numerical {
                message: e.to_string(),
                diagnostic: serde_json::json!({ "kind": "event_budget", "limit": limit, "time": time }),
            },
            LatticeError::RateMismatch {
                events,
                incremental,
                recount,
            } => CliError::Numerical {
                message: e.to_string(),
                diagnostic: serde_json::json!({
                    "kind": "rate_mismatch",
                    "events": events,
                    "incremental": incremental,
                    "recount": recount,
                }),
            },
        }
    }
}
