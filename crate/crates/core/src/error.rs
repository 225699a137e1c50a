use thiserror::Error;

/// Unified error type for the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a type invariant; names the offending field.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    /// Input file header is missing required columns. Fatal for the whole source.
    #[error("{source_name}: malformed header, missing columns: {missing:?}")]
    Schema {
        source_name: String,
        missing: Vec<String>,
    },

    #[error("duplicate id in index: {0}")]
    DuplicateId(String),

    #[error("no storms available")]
    NoStorms,

    #[error("all values missing, nothing to impute from")]
    AllMissing,

    #[error("loss date {0} precedes first HPI month")]
    DateBeforeHpi(String),

    #[error("variance of y is zero, r2 undefined")]
    ZeroVariance,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("row width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("unsupported model document schema version {0}")]
    SchemaVersion(u32),

    #[error("model kind mismatch: expected {expected}, document holds {actual}")]
    KindMismatch { expected: String, actual: String },

    #[error("unknown model kind {0:?}, valid kinds: forest, gbm, xgb, mlp, stacked")]
    UnknownKind(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
