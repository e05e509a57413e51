use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("backward called on `{layer}` before a forward pass")]
    BackwardBeforeForward { layer: String },

    #[error("unsupported checkpoint: {0}")]
    VersionMismatch(String),

    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checkpoint tensor table does not match the network: {0}")]
    ShapeTable(String),

    #[error("invalid checkpoint metadata: {0}")]
    Metadata(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

impl NnError {
    pub fn shape(op: &'static str, expected: &[usize], got: &[usize]) -> Self {
        NnError::Shape {
            op,
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
