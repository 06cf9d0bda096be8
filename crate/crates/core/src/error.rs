use std::io;

use thiserror::Error;

/// Errors produced anywhere in the link model and analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value that does not fit the target representation.
    #[error("range error: {0}")]
    Range(String),

    /// An invalid link configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input that violates an analysis precondition (too few points,
    /// overlapping windows, degenerate geometry, ...).
    #[error("analysis error: {0}")]
    Analysis(String),

    /// Tag stream not sorted by tick; `index` is the first out-of-order record.
    #[error("unsorted stream: record {index} (tick {tick}) precedes tick {previous}")]
    Unsorted { index: u64, tick: u64, previous: u64 },

    #[error("bad magic: expected \"QTT1\", found {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("corrupt record {index}: {reason}")]
    CorruptRecord { index: u64, reason: String },

    #[error("truncated stream: {0} trailing bytes after the last full record")]
    Truncated(usize),

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn analysis<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Analysis(msg.into()))
}
