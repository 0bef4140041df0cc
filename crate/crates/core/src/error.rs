use thiserror::Error;

/// Errors surfaced by every layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, names or hyperparameters that cannot describe a valid setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called out of order or with unusable arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// A NaN or infinite value appeared in the named quantity.
    #[error("numeric error in {0}")]
    Numeric(String),

    /// A distribution parameter fell outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(name.to_string()))
    }
}
