use lcq_core::datasets::DatasetError;
use lcq_core::lc::LcError;
use lcq_core::models::checkpoint::CheckpointError;
use lcq_core::models::ModelError;
use lcq_core::quantizers::QuantizeError;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Singular { .. } | ModelError::Diverged { .. } => CliError::Numerical(e.to_string()),
            ModelError::LayoutMismatch(_) | ModelError::InvalidConfig(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<QuantizeError> for CliError {
    fn from(e: QuantizeError) -> Self {
        match e {
            QuantizeError::NonFinite => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<LcError> for CliError {
    fn from(e: LcError) -> Self {
        match e {
            LcError::InvalidConfig(m) => CliError::Config(m),
            LcError::Model(m) => m.into(),
            LcError::Quantize(q) => q.into(),
            LcError::Diverged { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidConfig(_) | DatasetError::OddSide(_) => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Io(e.to_string())
    }
}
