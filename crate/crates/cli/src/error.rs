use std::path::PathBuf;

/// Command failure, classified for the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] semgrid_core::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for missing or corrupt data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Core(_) => 1,
        }
    }
}

impl From<semgrid_synth::Error> for CliError {
    fn from(e: semgrid_synth::Error) -> Self {
        use semgrid_synth::Error as E;
        match e {
            E::Config(_) | E::EmptyWorld(_) | E::DegenerateCamera { .. } | E::SequenceTooShort { .. } => {
                CliError::Config(e.to_string())
            }
            E::Io { .. } | E::Json { .. } | E::Dataset(_) => CliError::Data(e.to_string()),
            E::Core(c) => CliError::Core(c),
        }
    }
}

impl From<semgrid_net::Error> for CliError {
    fn from(e: semgrid_net::Error) -> Self {
        use semgrid_net::Error as E;
        match e {
            E::Config(_) | E::ConfigMismatch(_) | E::Shape(_) => CliError::Config(e.to_string()),
            E::Io { .. } | E::Checkpoint(_) | E::EmptyDataset => CliError::Data(e.to_string()),
            E::Core(c) => CliError::Core(c),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
