use std::path::PathBuf;

use thiserror::Error;

use crate::tensorcore::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("audio has {found} samples but at least {min} are needed")]
    AudioTooShort { found: usize, min: usize },
    #[error("{stage}: expected {expected} channels, found {found}")]
    Channels {
        stage: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {reason}", path.display())]
    Wav { path: PathBuf, reason: String },
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("training: {0}")]
    Training(String),
    #[error("{0}")]
    Invalid(String),
    #[error("sample rate mismatch: model expects {expected} Hz, data is {found} Hz")]
    SampleRate { expected: u32, found: u32 },
    #[error("streaming session already closed")]
    StreamClosed,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
