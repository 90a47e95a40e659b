use std::fmt;

use mortmap::anomaly::AnomalyError;
use mortmap::autoenc::AutoencError;
use mortmap::benchmark::BenchError;
use mortmap::gbt::GbtError;
use mortmap::geojson::GeoJsonError;
use mortmap::graph::GraphError;
use mortmap::impute::ImputeError;
use mortmap::rates::RateError;
use mortmap::temporal::TemporalError;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Numerical, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }

    /// Prefixes the message with context, keeping the kind.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError { kind: self.kind, message: format!("{what}: {}", self.message) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            ErrorKind::Config => "configuration error",
            ErrorKind::Data => "data error",
            ErrorKind::Numerical => "numerical failure",
        };
        write!(f, "{label}: {}", self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::data(e.to_string())
            }
        })*
    };
}

data_errors!(std::io::Error, csv::Error, serde_json::Error, GraphError, RateError, GeoJsonError);

impl From<ImputeError> for CliError {
    fn from(e: ImputeError) -> Self {
        match e {
            ImputeError::InvalidParameter(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidFraction(_) | BenchError::NoSeeds => CliError::config(e.to_string()),
            BenchError::Impute(inner) => inner.into(),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<TemporalError> for CliError {
    fn from(e: TemporalError) -> Self {
        match e {
            TemporalError::Impute(inner) => inner.into(),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<AnomalyError> for CliError {
    fn from(e: AnomalyError) -> Self {
        match e {
            AnomalyError::NoConvergence(_) | AnomalyError::AllFitsFailed(_) | AnomalyError::DegenerateSample => {
                CliError::numerical(e.to_string())
            }
            AnomalyError::InvalidTail(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<GbtError> for CliError {
    fn from(e: GbtError) -> Self {
        match e {
            GbtError::NonFinite => CliError::numerical(e.to_string()),
            GbtError::InvalidParameter(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<AutoencError> for CliError {
    fn from(e: AutoencError) -> Self {
        match e {
            AutoencError::NonFinite(_) => CliError::numerical(e.to_string()),
            AutoencError::InvalidConfig(_) | AutoencError::InvalidDims(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}
