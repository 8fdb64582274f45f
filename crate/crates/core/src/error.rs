use std::path::PathBuf;

use crate::construct::PasteSchedule;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no carrier mass up to horizon {horizon}")]
    EmptyPrefix { horizon: u64 },

    #[error("sequence is not strictly increasing at position {position} (value {value})")]
    NotIncreasing { position: usize, value: u64 },

    #[error("element {element} of the subset is not in the base set")]
    NotSubset { element: u64 },

    #[error("spectrum windows do not overlap")]
    DisjointWindows,

    #[error("test-function family is empty")]
    EmptyFamily,

    #[error("value {value} at position {position} is outside [0, 1]")]
    OutOfUnitRange { position: usize, value: f64 },

    #[error("a = {a} and q = {q} are not coprime")]
    NotCoprime { a: u64, q: u64 },

    #[error("horizon {horizon} exhausted before breakpoint {step} could be certified")]
    HorizonExhausted {
        step: usize,
        horizon: u64,
        partial: Box<PasteSchedule>,
    },

    #[error("growth criterion fails in block {block} and cannot be met within horizon {horizon}")]
    GrowthCriterion { block: usize, horizon: u64 },

    #[error("search for step {step} exceeded the horizon cap {cap}")]
    SearchCapExceeded { step: usize, cap: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
