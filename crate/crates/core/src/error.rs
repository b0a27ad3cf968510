use std::path::PathBuf;

use crate::backend::Capability;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("backend does not support {0}")]
    CapabilityUnsupported(Capability),

    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },

    /// The backend answered, but with an error payload or an unusable body.
    #[error("backend error: {0}")]
    Backend(String),

    #[error("no fixture for task `{task}` on image `{image}` with text {text:?}")]
    FixtureMiss {
        task: String,
        image: String,
        text: Option<String>,
    },

    #[error("grounding returned no region for `{0}`")]
    GroundingEmpty(String),

    #[error("malformed question template `{template}`: expected exactly one `{{art}}` slot, found {found}")]
    MalformedTemplate { template: String, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero-norm embedding vector")]
    ZeroVector,

    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,

    #[error("unknown waypoint `{0}`")]
    UnknownWaypoint(String),

    #[error("embedding space mismatch: baseline was recorded with `{baseline}`, backend is `{current}`")]
    EmbeddingSpaceMismatch { baseline: String, current: String },

    #[error("cannot write store at {path}: {source}")]
    StoreWrite {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot read store at {path}: {message}")]
    StoreRead { path: PathBuf, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used in CLI error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::CapabilityUnsupported(_) => "capability_unsupported",
            Error::BackendUnavailable { .. } => "backend_unavailable",
            Error::Backend(_) => "backend_error",
            Error::FixtureMiss { .. } => "fixture_miss",
            Error::GroundingEmpty(_) => "grounding_empty",
            Error::MalformedTemplate { .. } => "malformed_template",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ZeroVector => "zero_vector",
            Error::DimensionMismatch(..) => "dimension_mismatch",
            Error::EmptyInput => "empty_input",
            Error::UnknownWaypoint(_) => "unknown_waypoint",
            Error::EmbeddingSpaceMismatch { .. } => "embedding_space_mismatch",
            Error::StoreWrite { .. } => "store_write_error",
            Error::StoreRead { .. } => "store_read_error",
            Error::Config { .. } => "config_error",
            Error::Image(_) => "image_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
