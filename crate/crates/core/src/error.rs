//! Error type shared across the crate.
//!
//! Every variant carries a stable category string (see [`Error::category`])
//! so callers (notably the CLI) can map failures to machine-readable codes.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A feature matrix or memory bank layout does not match its peer.
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// Malformed input file; carries the offending location when known.
    #[error("format error in {path}: {message}{}", fmt_line(*.line))]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    /// Invalid configuration value or unparseable config file.
    #[error("config error: {0}")]
    Config(String),

    /// Statistical routine got an input it cannot process (e.g. zero spread).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable category identifier for machine-readable error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::LayoutMismatch(_) => "layout-mismatch",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Io { .. } => "io",
        }
    }
}
