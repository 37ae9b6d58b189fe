use std::path::PathBuf;

use crate::volume::{Dims, Timepoint};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} header: {reason}")]
    MalformedHeader { format: &'static str, reason: String },

    #[error("payload length {actual} does not match header ({expected} bytes expected)")]
    PayloadLength { expected: usize, actual: usize },

    #[error("unknown label code {code} at voxel {index}")]
    UnknownCode { code: i64, index: usize },

    #[error("invalid voxel spacing ({dx}, {dy}, {dz}); all components must be positive and finite")]
    InvalidSpacing { dx: f64, dy: f64, dz: f64 },

    #[error("invalid dimensions {0:?}; all axes must be positive")]
    InvalidDims([usize; 3]),

    #[error("one-hot channels overlap on {voxels} voxels ({fraction:.4}% of foreground)")]
    ChannelOverlap { voxels: usize, fraction: f64 },

    #[error("tissue code {0} is not a foreground tissue (expected 1..=4)")]
    InvalidTissue(u8),

    #[error("geometry mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Dims, right: Dims },

    #[error("voxel spacing mismatch: {0}")]
    SpacingMismatch(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("undefined coefficient of variation: pair {index} has both volumes zero")]
    UndefinedCv { index: usize },

    #[error("distance field requested for an empty reference surface")]
    EmptyReference,

    #[error("thickness is not defined for tissue {0}")]
    ThicknessUndefined(&'static str),

    #[error("timepoint mismatch: expected {expected}, found {found}")]
    TimepointMismatch { expected: Timepoint, found: Timepoint },

    #[error("at least {needed} observations required, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("constant input: correlation is undefined")]
    ConstantInput,

    #[error("manifest row {row}: {reason}")]
    Manifest { row: usize, reason: String },

    #[error("manifest validation failed:\n{}", .0.join("\n"))]
    ManifestValidation(Vec<String>),

    #[error("invalid ensemble spec {spec:?}: {reason}")]
    EnsembleSpec { spec: String, reason: String },

    #[error("nifti: {0}")]
    Nifti(#[from] nifti::NiftiError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
