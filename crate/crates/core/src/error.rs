use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trace file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed row at line {line}: expected {expected} cells, found {found}")]
    MalformedRow { line: u64, expected: usize, found: usize },

    #[error("target column `{0}` is not in the header")]
    UnknownTargetColumn(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("non-numeric cell at line {line}, column `{column}`")]
    NonNumericCell { line: u64, column: String },

    #[error("missing target value at line {line}")]
    MissingTargetValue { line: u64 },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is empty (need at least {min_samples} samples and one feature)")]
    EmptyMatrix { min_samples: usize },

    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("neighbourhood graph has zero total weight")]
    DegenerateGraph,

    #[error("target column required")]
    MissingTargets,

    #[error("too few samples: need {needed}, have {available}")]
    TooFewSamples { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature sets differ in size ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },

    #[error("feature set is empty")]
    EmptySet,

    #[error("sample fed after the stable feature set was already returned")]
    FedAfterDone,

    #[error("sample time index {found} does not follow {previous}")]
    OutOfOrderSample { previous: usize, found: usize },

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("length mismatch ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("mean of the test targets is zero")]
    ZeroMeanTarget,

    #[error("unknown feature index {0}")]
    UnknownFeature(usize),

    #[error("invalid synthetic trace spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
