use std::path::PathBuf;

use crate::profiles::ModelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("profile file row {row}, column `{column}`: {message}")]
    ProfileRow {
        row: usize,
        column: String,
        message: String,
    },

    #[error("no profiles")]
    NoProfiles,

    #[error("profile set mixes model kinds {first} and {other}")]
    MixedModels { first: ModelKind, other: ModelKind },

    #[error("model mismatch: cascade configured for {expected} but profiles are {found}")]
    ModelMismatch { expected: ModelKind, found: ModelKind },

    #[error("edge list line {line}: {message}")]
    EdgeList { line: usize, message: String },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error(
        "substation {substation}: cannot span {components} components with a fan-out cap of \
         {max_children}; try a larger max_children"
    )]
    Infeasible {
        substation: u64,
        max_children: usize,
        components: usize,
    },

    #[error("missing value: {0}")]
    Missing(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input (config, files, parameters)
    /// rather than by a failure while simulating.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Context { source, .. } => source.is_config_error(),
            Error::Infeasible { .. } | Error::Missing(_) | Error::ModelMismatch { .. } => false,
            _ => true,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
