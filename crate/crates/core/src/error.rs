use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or inconsistent shapes between arguments.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Cholesky factorization failed even after the largest jitter.
    #[error("ill-conditioned kernel matrix: factorization failed with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Normalized RMSE asked for against an all-zero reference vector.
    #[error("normalization undefined: reference values are identically zero")]
    UndefinedNormalization,

    #[error("model store: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found,
        })
    }
}
