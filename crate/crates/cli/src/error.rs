use std::fmt;
use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Structural problem in a binary table, located by field and byte offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableError {
    pub field: &'static str,
    pub offset: u64,
    pub detail: String,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "corrupt table: {} at byte {}: {}", self.field, self.offset, self.detail)
    }
}

impl std::error::Error for TableError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] speedcas_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Table {
        path: PathBuf,
        #[source]
        source: TableError,
    },
    #[error("{}:{line}: {detail}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{}: {detail}", path.display())]
    Data { path: PathBuf, detail: String },
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, detail: impl fmt::Display) -> Self {
        Error::Data {
            path: path.into(),
            detail: detail.to_string(),
        }
    }

    /// Process exit status: 2 usage or configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 2,
            Error::Core(e) => core_code(e),
            Error::Io { .. } | Error::Table { .. } | Error::Parse { .. } | Error::Data { .. } => 3,
        }
    }
}

fn core_code(e: &speedcas_core::Error) -> u8 {
    use speedcas_core::Error as E;
    match e {
        E::InvalidArgument(_) => 2,
        E::SolverFailure { .. } | E::UndefinedRatio(_) => 4,
        E::Encounter { source, .. } => match core_code(source) {
            2 => 3,
            c => c,
        },
    }
}
