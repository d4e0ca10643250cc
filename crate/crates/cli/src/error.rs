use surrogate_core::bridge::BridgeError;
use surrogate_core::diagnostics::DiagnosticsError;
use surrogate_core::structure::StructureError;
use surrogate_core::{LatentError, OptimError, SpaceError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    External(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::External(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }
}

impl From<LatentError> for CliError {
    fn from(e: LatentError) -> Self {
        match e {
            LatentError::RankDeficient { .. }
            | LatentError::IllConditioned { .. }
            | LatentError::NotInSpan { .. }
            | LatentError::ZeroWeight
            | LatentError::OutsideOrthant { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SpaceError> for CliError {
    fn from(e: SpaceError) -> Self {
        match e {
            SpaceError::Latent(inner) => inner.into(),
            SpaceError::Chart(inner) => CliError::Numerical(inner.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<OptimError> for CliError {
    fn from(e: OptimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<StructureError> for CliError {
    fn from(e: StructureError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BridgeError> for CliError {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Latent(inner) => inner.into(),
            BridgeError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::External(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("invalid JSON: {e}"))
    }
}
