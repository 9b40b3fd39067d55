use std::io;
use std::path::Path;

use crate::sparse::IngestError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Invariant(_) => EXIT_INVARIANT,
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        Self::Data(format!("{}: {err}", path.display()))
    }
}

impl From<sqp::Error> for CliError {
    fn from(e: sqp::Error) -> Self {
        use sqp::Error as E;
        match e {
            E::Invariant(_) => Self::Invariant(e.to_string()),
            E::InvalidParameter(_) | E::InvalidExponent(_) | E::NoClosedForm(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
