use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Matrix dimensions do not conform for the requested operation.
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// An argument is out of its documented range.
    Argument(String),
    /// A module or network configuration is inconsistent.
    Config(String),
    /// A neighbor index table references a point that does not exist.
    CorruptNit {
        entry: usize,
        index: usize,
        n_points: usize,
    },
    /// A value exceeds a fixed hardware or format capacity.
    Capacity(String),
    /// An input file could not be parsed.
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    /// An underlying I/O operation failed.
    Io { path: String, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shape { op, left, right } => write!(
                f,
                "shape mismatch in {op}: left={}x{}, right={}x{}",
                left.0, left.1, right.0, right.1
            ),
            Self::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Self::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Self::CorruptNit {
                entry,
                index,
                n_points,
            } => write!(
                f,
                "corrupt neighbor index table: entry {entry} references point {index} but only {n_points} points exist"
            ),
            Self::Capacity(msg) => write!(f, "capacity exceeded: {msg}"),
            Self::Parse {
                path,
                line,
                message,
            } => {
                if *line == 0 {
                    write!(f, "parse error in {path}: {message}")
                } else {
                    write!(f, "parse error in {path}, line {line}: {message}")
                }
            }
            Self::Io { path, message } => write!(f, "io error on {path}: {message}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 for configuration/usage errors, 3 for input parse errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Io { .. } => 3,
            _ => 2,
        }
    }
}
