use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle")]
    DegenerateTriangle,

    #[error("degenerate triangle at face {face}")]
    DegenerateFace { face: usize },

    #[error("missing or invalid required property `{0}`")]
    Schema(String),

    #[error("file is truncated: {0}")]
    TruncatedFile(String),

    #[error("line {line}: face has {vertices} vertices, only triangles are supported")]
    NonTriangleFace { line: usize, vertices: usize },

    #[error("line {line}: index {index} out of range ({count} entries)")]
    Index { line: usize, index: i64, count: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("faces do not fit in a {resolution}x{resolution} atlas; minimum feasible resolution is {min_resolution}")]
    AtlasOverflow { resolution: u32, min_resolution: u32 },

    #[error("mesh has no UV coordinates; run `unwrap` first to generate an atlas")]
    MissingUVs,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("manifest error: missing or invalid field `{0}`")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("subprocess failed: {0}")]
    Subprocess(String),
}

/// Broad classes used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Config,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::AtlasOverflow { .. } | Error::Manifest(_) => {
                ErrorClass::Config
            }
            _ => ErrorClass::Data,
        }
    }
}
