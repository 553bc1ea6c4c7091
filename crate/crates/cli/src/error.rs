//! Error classification for process exit codes.

use spectrec_core::fista::FistaError;
use spectrec_core::image::CoreError;
use spectrec_core::io::IoError;
use spectrec_core::metrics::MetricsError;
use spectrec_core::phantom::PhantomError;
use spectrec_core::snn::SnnError;
use spectrec_core::sss::SssError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or flag combinations (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or inconsistent input data (exit 3).
    #[error("{0}")]
    Data(String),
    /// Solver breakdown: non-finite iterates, failed decompositions (exit 4).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<PhantomError> for CliError {
    fn from(e: PhantomError) -> CliError {
        match e {
            PhantomError::InvalidDims(_) => CliError::Usage(e.to_string()),
            PhantomError::SeparationFailed(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FistaError> for CliError {
    fn from(e: FistaError) -> CliError {
        CliError::Numerical(e.to_string())
    }
}

impl From<SnnError> for CliError {
    fn from(e: SnnError) -> CliError {
        match e {
            SnnError::Solver(inner) => CliError::Numerical(inner.to_string()),
            SnnError::InvalidParams(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SssError> for CliError {
    fn from(e: SssError) -> CliError {
        match e {
            SssError::Solver(inner) => CliError::Numerical(inner.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Data(e.to_string())
    }
}
