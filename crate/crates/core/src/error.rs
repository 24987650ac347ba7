use std::path::PathBuf;

/// Errors produced by the estimators, file codecs and the benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("scene outside unambiguous window: {0}")]
    OutsideWindow(String),

    #[error("location bins outside the range window [0, Ms): {bins:?}")]
    BinsOutOfWindow { bins: Vec<usize> },

    #[error("empty grid")]
    EmptyGrid,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stale hop table: {0}")]
    StaleHopTable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("unknown algorithm {name:?}; valid names: indirect, direct, hop, hop:<nearest|linear|poly3>:<oversample>")]
    UnknownAlgorithm { name: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::DegenerateGeometry(_)
                | Error::OutsideWindow(_)
                | Error::BinsOutOfWindow { .. }
                | Error::EmptyGrid
                | Error::Parse { .. }
                | Error::Scenario(_)
                | Error::UnknownAlgorithm { .. }
                | Error::StaleHopTable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
