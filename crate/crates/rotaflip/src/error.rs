use std::fmt;

/// Errors shared across the crate.
#[derive(Debug)]
pub enum Error {
    /// Two tensors (or a tensor and a mask) cannot be combined.
    ShapeMismatch {
        op: &'static str,
        lhs: [usize; 4],
        rhs: [usize; 4],
    },
    /// An operation that permutes spatial positions needs a square map.
    NonSquare { height: usize, width: usize },
    /// A constructor or operation received an argument outside its domain.
    InvalidArgument(String),
    /// A configuration failed validation before any work started.
    Config(String),
    /// A file or stream could not be parsed; `offset` is the byte position.
    Parse { path: String, offset: usize, message: String },
    /// Training produced a non-finite loss or gradient.
    Divergence(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch {lhs:?} vs {rhs:?}")
            }
            Error::NonSquare { height, width } => {
                write!(f, "spatial map must be square, got {height}x{width}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Parse { path, offset, message } => {
                write!(f, "parse error in {path} at byte {offset}: {message}")
            }
            Error::Divergence(msg) => write!(f, "divergence: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
