use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Invalid configuration; `path` locates the offending field.
    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: bifid_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<HarnessError>,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn config_err(path: impl Into<String>, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Attaches a description of the failing step to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for bifid_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| HarnessError::Core { context: what(), source })
    }
}
