use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnedError {
    #[error(transparent)]
    Core(#[from] ambc_core::Error),

    #[error(transparent)]
    Nn(#[from] ambc_nn::NnError),

    #[error("class {class} has no pilot symbol; every hypothesis needs at least one")]
    UncoveredClass { class: usize },

    #[error("checkpoint does not describe this model: {0}")]
    Architecture(String),
}

pub type Result<T, E = LearnedError> = std::result::Result<T, E>;
