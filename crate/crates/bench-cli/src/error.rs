use std::path::PathBuf;

use swipt::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("certification failed on {failed} of {total} groups")]
    CertificationFailed { failed: usize, total: usize },
}

impl BenchError {
    /// Process exit code: 1 usage or config, 2 I/O, 3 certification.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Io { .. } | BenchError::Csv { .. } => 2,
            BenchError::CertificationFailed { .. } => 3,
            _ => 1,
        }
    }
}
