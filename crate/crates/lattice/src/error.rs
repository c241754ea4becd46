use mft_core::MftError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("event budget of {limit} exhausted at t = {time}")]
    EventBudget { limit: u64, time: f64 },

    #[error("rate bookkeeping drifted after {events} events: {incremental} discordant bonds tracked, {recount} counted")]
    RateMismatch {
        events: u64,
        incremental: usize,
        recount: usize,
    },

    #[error(transparent)]
    Core(#[from] MftError),
}

impl LatticeError {
    /// True when the run itself failed rather than its inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            LatticeError::EventBudget { .. } | LatticeError::RateMismatch { .. } => true,
            LatticeError::Core(e) => e.is_numerical(),
            LatticeError::InvalidInput(_) => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, LatticeError>;
