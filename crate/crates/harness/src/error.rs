use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] ambc_core::Error),

    #[error(transparent)]
    Learned(#[from] ambc_learned::LearnedError),

    #[error(transparent)]
    Nn(#[from] ambc_nn::NnError),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("no {method} model for N = {n_tags}; train one per tag count (train-{method} --tags {n_tags}) and pass it with --{method}")]
    MissingModel { method: &'static str, n_tags: usize },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("config file: {0}")]
    ConfigFile(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        HarnessError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Csv(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
