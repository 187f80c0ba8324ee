use thiserror::Error;

/// Errors raised across the simulation, training and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system size: n_atoms must be at least 1 (got {0})")]
    InvalidSystemSize(usize),

    #[error("amplitude vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state norm deviates from 1 by {0:e}")]
    NormViolation(f64),

    #[error("unknown action code {0}")]
    UnknownActionCode(u8),

    #[error("action {action} is not allowed under scheme {scheme}")]
    IllegalAction { action: String, scheme: String },

    #[error("action source produced {got} actions, expected {expected}")]
    ActionCountMismatch { expected: usize, got: usize },

    #[error("mean spin vanishes (|<J>| = {0:e}); squeezing direction undefined")]
    UndefinedMeanSpin(f64),

    #[error("squeezing minimum at t = {0} lies on the scan boundary")]
    NotBracketed(f64),

    #[error("non-informative working point: |slope| = {0:e}")]
    NonInformativeWorkingPoint(f64),

    #[error("non-finite value in {context} (episode seed {seed})")]
    NonFinite { context: String, seed: u64 },

    #[error("combinatorial budget exceeded: {needed} sequences > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("power-law fit needs at least 2 distinct abscissae (got {0})")]
    Underdetermined(usize),

    #[error("power-law fit requires positive values (got {0})")]
    NonPositive(f64),

    #[error("no trained sequence available for N = {0}")]
    MissingSequence(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSystemSize(_) => "invalid_system_size",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NormViolation(_) => "norm_violation",
            Error::UnknownActionCode(_) => "unknown_action_code",
            Error::IllegalAction { .. } => "illegal_action",
            Error::ActionCountMismatch { .. } => "action_count_mismatch",
            Error::UndefinedMeanSpin(_) => "undefined_mean_spin",
            Error::NotBracketed(_) => "not_bracketed",
            Error::NonInformativeWorkingPoint(_) => "non_informative_working_point",
            Error::NonFinite { .. } => "non_finite",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Underdetermined(_) => "underdetermined",
            Error::NonPositive(_) => "non_positive",
            Error::MissingSequence(_) => "missing_sequence",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
