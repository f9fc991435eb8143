use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] semgrid_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty world: extent must be positive, got {0}")]
    EmptyWorld(f64),
    #[error("degenerate camera {index}: {reason}")]
    DegenerateCamera { index: usize, reason: String },
    #[error("clip of {frames} frames is too short for a sequence spanning {span} frames")]
    SequenceTooShort { frames: usize, span: usize },
    #[error("invalid dataset: {0}")]
    Dataset(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
