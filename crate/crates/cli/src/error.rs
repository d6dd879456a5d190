use hipmetrics_core::data::DataError;
use hipmetrics_core::geometry::GeometryError;
use hipmetrics_core::metrics::MetricsError;
use hipmetrics_core::scoring::ScoringError;
use thiserror::Error;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Geometry(String),
    #[error("{0}")]
    Statistics(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::Statistics(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Geometry(g) => CliError::Geometry(g.to_string()),
            e @ DataError::Io { .. } => CliError::Other(e.to_string()),
            e @ (DataError::InvalidTarget(_) | DataError::InvalidNoiseRate(_)) => CliError::Other(e.to_string()),
            e => CliError::Schema(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Geometry(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidInput(msg) => CliError::Schema(msg),
            e => CliError::Statistics(e.to_string()),
        }
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        match e {
            ScoringError::DegenerateDataset(msg) => CliError::Statistics(msg),
            ScoringError::Io(e) => CliError::Other(e.to_string()),
            e => CliError::Schema(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
