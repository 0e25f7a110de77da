use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("degenerate polygon: no strictly interior point found")]
    DegeneratePolygon,

    #[error("region enumeration requires 2D input, network has input_dim {0}")]
    NotTwoDimensional(usize),

    #[error("region count {count} exceeded cap {cap} at layer {layer}")]
    RegionCapExceeded { count: usize, cap: usize, layer: usize },

    #[error("invalid estimator inputs: {0}")]
    InvalidEstimatorInputs(String),

    #[error("invalid dataset request: {0}")]
    InvalidDataset(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
