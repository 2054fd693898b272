use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum FrioError {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for ensemble of {n} states")]
    IndexOutOfRange { index: usize, n: usize },

    /// Least-squares fringe fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Measured parameters do not describe a physical state.
    #[error("reconstruction error: {0}")]
    Reconstruction(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// Invalid or inconsistent configuration (run config, calibration table, optics).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FrioError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a failure at run time.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Self::Domain(_) | Self::IndexOutOfRange { .. } | Self::Config(_) | Self::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, FrioError>;
