use hkt::config::ConfigError;
use hkt::domain::DomainError;
use hkt::metrics::MetricError;
use hkt::model::ModelError;
use hkt::numerics::NumericsError;
use hkt::synth::SynthError;
use hkt::training::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Domain {
        path: String,
        #[source]
        source: DomainError,
    },
    #[error("{path}: {source}")]
    Checkpoint {
        path: String,
        #[source]
        source: NumericsError,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Failed(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl CliError {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn domain(path: &std::path::Path) -> impl FnOnce(DomainError) -> Self + '_ {
        move |source| Self::Domain {
            path: path.display().to_string(),
            source,
        }
    }
}
