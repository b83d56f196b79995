use thiserror::Error;

use crate::dsp::DspError;
use crate::eda::EdaError;
use crate::featureset::FeatureError;
use crate::ingest::IngestError;
use crate::ml::MlError;
use crate::motion::MotionError;
use crate::ppg::PpgError;
use crate::stats::StatsError;

/// Crate-level error, wrapping the per-module failure kinds.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Ppg(#[from] PpgError),
    #[error(transparent)]
    Eda(#[from] EdaError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("nothing to report: {0}")]
    EmptyResults(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Validation errors map to CLI exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Ingest(_) | Error::Config(_) | Error::Json(_) | Error::Feature(FeatureError::Ingest(_))
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
