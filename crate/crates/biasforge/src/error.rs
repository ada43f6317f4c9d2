use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] biasforge_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: line {line}: {message}", path.display())]
    Line { path: PathBuf, line: usize, message: String },

    #[error("{}: duplicate record id {id:?} on lines {first} and {second}", path.display())]
    DuplicateLine { path: PathBuf, id: String, first: usize, second: usize },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, status: Option<u16>, message: String },

    #[error("endpoint rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },

    #[error("malformed endpoint response: {0}")]
    Protocol(String),

    #[error("prompt is empty")]
    EmptyPrompt,

    #[error("cannot embed an empty text (index {0})")]
    EmptyText(usize),

    #[error("no texts to embed")]
    NoTexts,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training bridge: {0}")]
    Bridge(String),

    #[error("loss log {}: step {step}: total {total} != task {task} + {lambda} * align {align}", path.display())]
    LossIdentity { path: PathBuf, step: u64, task: f64, align: f64, lambda: f64, total: f64 },

    #[error("run directory {} contains no completed cells", .0.display())]
    EmptyRun(PathBuf),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn json(path: impl AsRef<Path>, source: serde_json::Error) -> Self {
        Error::Json { path: path.as_ref().to_path_buf(), source }
    }
}
