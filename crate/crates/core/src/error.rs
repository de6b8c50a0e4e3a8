use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("control sequences have mismatched lengths: expected {expected}, found {found} at index {index}")]
    LengthMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },

    #[error("level set {step} is empty: every successor was already claimed by an earlier level")]
    EmptyLevel { step: usize },

    #[error("level {step} is out of range for a stack of {levels} levels")]
    LevelOutOfRange { step: usize, levels: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("training diverged at epoch {epoch}, level {level}: loss is {loss}")]
    TrainingDiverged {
        epoch: usize,
        level: usize,
        loss: f64,
    },

    #[error("bad file magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads version {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("file is truncated or malformed: {0}")]
    Malformed(String),

    #[error("grid parse error at line {line}: {message}")]
    GridParse { line: usize, message: String },

    #[error("could not place obstacle {placed} of {requested} after {attempts} attempts")]
    PackingFailed {
        placed: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("simulation already terminated with outcome {0}")]
    Terminated(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
