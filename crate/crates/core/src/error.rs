use thiserror::Error;

/// Errors raised by the system model and the classical detectors.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("pilot schedule does not match the configuration: {0}")]
    Schedule(String),

    #[error("pilot correlation is degenerate for configuration {config}: zero ambient energy")]
    DegenerateCorrelation { config: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                expected,
                got,
            })
        }
    }
}
