use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input text does not have the expected shape (header, columns, row count).
    #[error("format error: {0}")]
    Format(String),

    /// A year lies outside the range covered by the data it is looked up in.
    #[error("year {year} outside range [{lo}, {hi}]")]
    YearOutOfRange { year: i64, lo: i64, hi: i64 },

    /// Precondition violated by caller-supplied values.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Too few usable points for the requested fit.
    #[error("too few points: need at least {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    /// Series with zero variance where a normalized statistic is required.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Iterative solver hit a non-finite value or could not regularize the system.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes input-format errors with the file they came from.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        let at = path.display();
        match self {
            Error::Format(msg) => Error::Format(format!("{at}: {msg}")),
            Error::Csv { context, source } => Error::Csv {
                context: format!("{at}: {context}"),
                source,
            },
            other => other,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            context: context.into(),
            source,
        }
    }
}
