use radaract_core::container::FormatError;
use radaract_core::dataset::DatasetError;
use radaract_core::dsp::DspError;
use radaract_core::gru::GruError;
use radaract_core::pad::PadError;
use radaract_core::radar::RadarError;
use radaract_core::status::StatusError;
use radaract_telemetry::{ConfigError, ServiceError};
use thiserror::Error;

/// Every failure maps to one exit code: 1 usage, 2 I/O, 3 validation.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        CliError::Validation(msg.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(_) => CliError::Io(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GruError> for CliError {
    fn from(e: GruError) -> Self {
        match e {
            GruError::Format(f) => f.into(),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) => CliError::Io(e.to_string()),
            DatasetError::Format(f) => f.into(),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PadError> for CliError {
    fn from(e: PadError) -> Self {
        match e {
            PadError::Format(f) => f.into(),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StatusError> for CliError {
    fn from(e: StatusError) -> Self {
        match e {
            StatusError::Io(_) => CliError::Io(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(_) | ServiceError::Stopped => CliError::Io(e.to_string()),
            ServiceError::Status(s) => s.into(),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<RadarError> for CliError {
    fn from(e: RadarError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        CliError::Validation(e.to_string())
    }
}
