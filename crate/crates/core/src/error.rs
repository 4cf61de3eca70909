use std::path::PathBuf;

use crate::domain::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation failed:\n{0}")]
    Validation(ValidationReport),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sweep cell (g={g_index}, d={d_index}, m={m_index}, rep={rep}) is invalid:\n{report}")]
    InvalidCell {
        g_index: usize,
        d_index: usize,
        m_index: usize,
        rep: usize,
        report: ValidationReport,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
