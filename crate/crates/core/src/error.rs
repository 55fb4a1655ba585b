use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection, evaluation and dataset pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no viewpoints: the elevation band selects no icosphere vertex")]
    NoViewpoints,

    #[error("silhouette clipped: tube projects outside the image")]
    SilhouetteClipped,

    #[error("empty mask")]
    EmptyMask,

    #[error("degenerate template: {found} strong contour pixels, need at least {required}")]
    DegenerateTemplate { found: usize, required: usize },

    #[error("bin count exceeds lookup width: n0 = {0}, at most 8 supported")]
    BinCountExceedsLookup(usize),

    #[error("empty template library")]
    EmptyLibrary,

    #[error("invalid template id {0}")]
    InvalidTemplateId(usize),

    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },

    #[error("corrupt RLE: run sum {sum} does not match {expected} pixels")]
    CorruptRle { sum: u64, expected: u64 },

    #[error("dangling image_id {0}")]
    DanglingImageId(String),

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("malformed segmentation: {0}")]
    MalformedSegmentation(String),

    #[error("unsupported schema version {0:?}")]
    UnsupportedSchemaVersion(String),

    #[error("tube collision between placements {0} and {1}")]
    TubeCollision(usize, usize),

    #[error("config: {0}")]
    Config(String),

    #[error("template library format: {0}")]
    LibraryFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
