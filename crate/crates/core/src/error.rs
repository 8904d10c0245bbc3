use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ShieldError>;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum ShieldError {
    #[error("duplicate preferred term `{term}`")]
    DuplicateTerm { term: String },

    #[error("invalid count `{value}` at line {line}, column `{column}`: {reason}")]
    InvalidCount {
        line: u64,
        column: String,
        value: String,
        reason: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no rows with at least one event remain")]
    EmptyTable,

    #[error("invalid embedding vector for `{term}`: {reason}")]
    InvalidVector { term: String, reason: String },

    #[error("no embedding for {} term(s): {}", .terms.len(), .terms.join(", "))]
    MissingEmbedding { terms: Vec<String> },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("every term is isolated in the utility graph")]
    EmptyGraph,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<ShieldError>,
    },
}

impl ShieldError {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        ShieldError::Io {
            context: context.into(),
            source,
        }
    }

    /// The underlying error, with any file context removed.
    pub fn root(&self) -> &ShieldError {
        match self {
            ShieldError::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status for this error: 1 for usage/configuration
    /// problems, 2 for anything caused by the input data.
    pub fn exit_code(&self) -> i32 {
        match self {
            ShieldError::Config(_) | ShieldError::InvalidArgument(_) => 1,
            ShieldError::InFile { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
