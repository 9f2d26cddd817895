use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size {size} for {kind} transform")]
    InvalidSize { kind: &'static str, size: usize },

    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid frame configuration: {0}")]
    InvalidConfig(String),

    #[error("bit count mismatch: expected {expected}, got {got}")]
    BitCount { expected: usize, got: usize },

    #[error("unsupported QAM order {0} (expected 4, 16 or 64)")]
    UnsupportedQamOrder(u32),

    #[error("scheme {0} is not a USC scheme (U_F must be the DFT)")]
    SchemeMismatch(String),

    #[error("path delay {delay} exceeds l_max = {l_max}")]
    DelayOutOfRange { delay: usize, l_max: usize },

    #[error("precoder row {row} has a zero entry at column {col}; embedded-pilot estimation impossible")]
    ZeroPrecoderEntry { row: usize, col: usize },

    #[error("{method} interpolation needs at least {needed} pilot samples, got {got}")]
    TooFewPoints {
        method: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate equalization in block {block}")]
    DegenerateEqualization { block: usize },

    #[error("plan error (line {line}): {msg}")]
    Plan { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
