use thiserror::Error;

use crate::game::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed game: {0}")]
    InvalidGame(ValidationReport),
    #[error("reward {reward} at ({state},{action}) lies outside [0,1]")]
    RewardOutOfUnitInterval {
        state: usize,
        action: usize,
        reward: f64,
    },
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("action {action} is out of range at state {state}")]
    InvalidAction { state: usize, action: usize },
    #[error("state {state} is owned by the fixed player but has no action assigned")]
    MissingAction { state: usize },
    #[error("policy iteration needs a single optimizing player; states {first} and {second} disagree")]
    NotSinglePlayer { first: usize, second: usize },
    #[error("iteration cap {limit} exceeded")]
    IterationCap { limit: usize },
    #[error("power iteration did not converge within {iterations} steps")]
    NonConvergence { iterations: usize },
    #[error("strategy space has {count} elements, above the enumeration limit {limit}")]
    EnumerationTooLarge { count: f64, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sequence direction is {found}, expected {expected}")]
    DirectionMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
