use std::path::PathBuf;

use thiserror::Error;

use crate::sparse_format::SparsityLevel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("N:M pattern violated for {level} at row {row}, group {group}")]
    PatternViolation {
        level: SparsityLevel,
        row: usize,
        group: usize,
    },

    #[error("index {index} out of group (size {group_size}) at value {position}")]
    IndexOutOfGroup {
        index: u8,
        group_size: usize,
        position: usize,
    },

    #[error("operand arity mismatch: {level} expects {expected} B lanes, got {got}")]
    ArityMismatch {
        level: SparsityLevel,
        expected: usize,
        got: usize,
    },

    #[error("extraction buffer overflow: {live} live entries (capacity 6)")]
    ExtractOverflow { live: usize },

    #[error("{0}")]
    Reconfiguration(String),

    #[error("fabric capability '{capability}' cannot run {level} operands")]
    Capability {
        capability: &'static str,
        level: SparsityLevel,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("bank {bank} asked for {bits} bits in one cycle (width {width})")]
    BandwidthInfeasible {
        bank: String,
        bits: u32,
        width: u32,
    },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
