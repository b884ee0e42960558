use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] hmvae_core::Error),
    #[error("not a {format} file: magic bytes {found:?}")]
    BadMagic { format: &'static str, found: Vec<u8> },
    #[error("{format} version {found} is not supported (expected {supported})")]
    Version {
        format: &'static str,
        found: String,
        supported: &'static str,
    },
    #[error("{format} file truncated: needed {expected} bytes, found {found}")]
    Truncated {
        format: &'static str,
        expected: u64,
        found: u64,
    },
    #[error("{format} file has {extra} unexpected trailing bytes")]
    TrailingBytes { format: &'static str, extra: u64 },
    #[error("malformed {format} header: {source}")]
    Header {
        format: &'static str,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
