use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("cell (group {group}, label {label}) has {size} members; stratification needs at least {needed}")]
    Stratification {
        group: String,
        label: u8,
        size: usize,
        needed: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("group {group} has no positive examples")]
    DegenerateGroup { group: usize },

    #[error("group {group} is empty")]
    EmptyGroup { group: usize },

    #[error("undefined rate for group {group}: {reason}")]
    UndefinedRate { group: usize, reason: String },

    #[error("group sets differ: {left:?} vs {right:?}")]
    GroupMismatch { left: Vec<String>, right: Vec<String> },

    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: usize, loss: f64 },

    #[error("augmentation unavailable for row {row}: cohort has {available} members, need {needed}")]
    AugmentationUnavailable {
        row: usize,
        available: usize,
        needed: usize,
    },

    #[error("cohort has {available} members, need {needed}")]
    CohortTooSmall { available: usize, needed: usize },

    #[error("simplex needs at least one vertex")]
    EmptyVertices,

    #[error("only {succeeded} of {attempted} replicates trained successfully")]
    Replicates { succeeded: usize, attempted: usize },

    #[error("no label posterior available and single-label mode was not declared")]
    MissingConditional,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}
