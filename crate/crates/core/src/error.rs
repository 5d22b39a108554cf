use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid jump vector: {0}")]
    InvalidJump(String),

    #[error("jump would drive type {index} negative")]
    NegativeCount { index: usize },

    #[error("rate overflow: jump rate {rate} is not a finite non-negative number")]
    RateOverflow { rate: f64 },

    #[error("event budget of {limit} exhausted at t = {time}")]
    EventBudget { limit: u64, time: f64 },

    #[error("step size underflow at t = {time} (h = {step:e}); the system is likely too stiff")]
    StepUnderflow { time: f64, step: f64 },

    #[error("component {index} reached {value:e} at t = {time}, below the tolerance floor")]
    NegativeComponent { time: f64, index: usize, value: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("drift matrix is not stable (spectral abscissa {abscissa:e})")]
    Unstable { abscissa: f64 },

    #[error("path norm blew up at t = {time}; reduce dt")]
    BlowUp { time: f64 },

    #[error("time horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical scheme rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::NegativeComponent { .. }
                | Error::NonConvergence { .. }
                | Error::Unstable { .. }
                | Error::BlowUp { .. }
                | Error::RateOverflow { .. }
        )
    }
}
