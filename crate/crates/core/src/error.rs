use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("insufficient precision: {required_bits} bits required, {available_bits} available")]
    Precision {
        required_bits: u32,
        available_bits: u32,
    },

    #[error("degenerate interval: {0}")]
    Degenerate(String),

    #[error("independence certificate failed: relation {relation:?} has norm {norm:e}")]
    Certificate { relation: Vec<i64>, norm: f64 },

    #[error("no solution within bound {bound}; best n = {best_n} with max norm {best_norm:e}")]
    NotFound {
        bound: u64,
        best_n: i64,
        best_norm: f64,
    },

    #[error("resource cap exceeded: {0}")]
    Cap(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("embedding failed for {} target(s): {failures:?}", failures.len())]
    Embedding { failures: Vec<Vec<u32>> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
