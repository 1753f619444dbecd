use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("{what} = {value} is out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: i64,
        range: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("received signal is identically zero")]
    DegenerateSignal,

    #[error("matrix is not positive definite to working precision")]
    NotPositiveDefinite,

    #[error("enumeration needs {needed} candidate supports, cap is {cap}")]
    Budget { needed: u128, cap: u128 },

    #[error("malformed pilot file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
