use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solver failure at stage {stage}, vertex {vertex}: {detail}")]
    SolverFailure {
        stage: usize,
        vertex: usize,
        detail: String,
    },
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("encounter {id}: {source}")]
    Encounter {
        id: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
