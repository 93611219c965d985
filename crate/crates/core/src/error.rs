use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("no dimensions recorded for image '{image_id}'")]
    MissingDimension { image_id: String },

    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("duplicate image id '{image_id}'")]
    DuplicateImage { image_id: String },

    #[error("unsupported manifest version '{found}' (expected '{expected}')")]
    SchemaVersionMismatch { found: String, expected: String },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("I/O error on '{}': {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("fraction {fraction} of {n} items selects no items")]
    FractionTooSmall { fraction: f64, n: usize },

    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),

    #[error("no class has any ground-truth box")]
    NoGroundTruth,

    #[error("ROC-AUC needs both positive and negative labels")]
    SingleClassOnly,

    #[error("metric is undefined on every bootstrap resample")]
    AllResamplesUndefined,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("prediction references unknown image id '{image_id}'")]
    UnknownImage { image_id: String },

    #[error("no prediction for image id '{image_id}'")]
    MissingPrediction { image_id: String },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("image of {height}x{width} is too small (minimum 8x8)")]
    ImageTooSmall { height: usize, width: usize },

    #[error("loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize },

    #[error("no label column contains both classes")]
    DegenerateLabels,

    #[error("invalid binary file: {0}")]
    InvalidBinary(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateBox(_) => "DegenerateBox",
            Error::InvalidBox(_) => "InvalidBox",
            Error::MissingDimension { .. } => "MissingDimension",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::DuplicateImage { .. } => "DuplicateImage",
            Error::SchemaVersionMismatch { .. } => "SchemaVersionMismatch",
            Error::InvalidManifest(_) => "InvalidManifest",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
            Error::EmptyDataset => "EmptyDataset",
            Error::FractionTooSmall { .. } => "FractionTooSmall",
            Error::InvalidSplitSpec(_) => "InvalidSplitSpec",
            Error::NoGroundTruth => "NoGroundTruth",
            Error::SingleClassOnly => "SingleClassOnly",
            Error::AllResamplesUndefined => "AllResamplesUndefined",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::UnknownImage { .. } => "UnknownImage",
            Error::MissingPrediction { .. } => "MissingPrediction",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::ImageTooSmall { .. } => "ImageTooSmall",
            Error::DivergenceDetected { .. } => "DivergenceDetected",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::InvalidBinary(_) => "InvalidBinary",
        }
    }
}
