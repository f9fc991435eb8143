use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] semgrid_core::Error),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint config does not match: {0}")]
    ConfigMismatch(String),
    #[error("dataset has no training sequences")]
    EmptyDataset,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
