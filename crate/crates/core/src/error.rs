use std::path::{Path, PathBuf};

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}:{row}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stations missing from the region map: {}", .0.join(", "))]
    UnknownStations(Vec<String>),

    #[error("conflicting units for feature {feature}: {first} vs {second}")]
    ConflictingUnits {
        feature: String,
        first: String,
        second: String,
    },

    #[error("latitude {0} is outside the supported band |lat| < 66.5")]
    LatitudeOutOfRange(f64),

    #[error("feature {feature} has no observed values in region {region}")]
    EmptyColumn { feature: String, region: String },

    #[error("no neighbor of {region} has data for feature {feature}")]
    NoNeighborData { region: String, feature: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {0} is outside {{0, 1}}")]
    InvalidLabel(usize),

    #[error("{0}: both classes must be present")]
    SingleClass(String),

    #[error("batch normalization in training mode needs a batch of at least 2")]
    BatchTooSmall,

    #[error("feature catalog hash mismatch: expected {expected}, found {found}")]
    CatalogMismatch { expected: String, found: String },

    #[error("normalization bounds hash mismatch: expected {expected}, found {found}")]
    BoundsMismatch { expected: String, found: String },

    #[error("{0} features is too many for exact Shapley values (limit {1}); use the kernel estimator")]
    TooManyFeatures(usize, usize),

    #[error("singular regression system: {0}")]
    Singular(String),

    #[error("infeasible prevalence: {0}")]
    InfeasiblePrevalence(String),

    #[error("serialization: {0}")]
    Serde(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
            || matches!(self, Error::Csv { source, .. } if source.is_io_error())
    }

    pub(crate) fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn csv(path: impl AsRef<Path>) -> impl FnOnce(csv::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Csv { path, source }
    }

    pub(crate) fn parse(path: impl AsRef<Path>, row: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            row,
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
