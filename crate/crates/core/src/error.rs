use thiserror::Error;

use crate::container::ContainerError;
use crate::dataset::DatasetError;
use crate::features::FeatureError;
use crate::metrics::MetricsError;
use crate::neural::NeuralError;
use crate::ocon::OconError;
use crate::profiling::ProfileError;
use crate::search::SearchError;
use crate::trainer::TrainError;

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Ocon(#[from] OconError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
