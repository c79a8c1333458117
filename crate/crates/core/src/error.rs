use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input contains no points")]
    EmptyInput,
    #[error("spread is undefined: points {0} and {1} coincide")]
    SpreadUndefined(usize, usize),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("duplicate points: {0}")]
    DuplicatePoints(String),
    #[error("invalid point index {index} (space has {n} points)")]
    InvalidPoint { index: usize, n: usize },
    #[error("radius bound unavailable for scaling constant {0}")]
    BoundUnavailable(f64),
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("tree does not match space: {0}")]
    Mismatch(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
