use thiserror::Error;

/// Errors surfaced by model construction, solver preconditions, and
/// simulation configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unknown state index {0}")]
    UnknownState(usize),

    #[error("unknown action index {action} for state {state}")]
    UnknownAction { state: usize, action: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown controller '{0}'")]
    UnknownController(String),
}
