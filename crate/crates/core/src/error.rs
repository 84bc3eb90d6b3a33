use std::path::PathBuf;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("tape already consumed by a previous backward pass")]
    StaleTape,
    #[error("missing gradient for trainable parameter `{0}`")]
    MissingGrad(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image too small: {width}x{height} (minimum 64x64)")]
    ImageTooSmall { width: usize, height: usize },
    #[error("no line segments in frame")]
    NoLines,
    #[error("empty intrinsics list")]
    EmptyList,
    #[error("zero image dimension")]
    ZeroDimension,
    #[error("sequence too short: {0} frames (need at least 2)")]
    TooShort(usize),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("camera center outside scene")]
    CameraOutsideScene,

    #[error("empty dataset")]
    EmptyDataset,
    #[error("label error: {0}")]
    LabelError(String),
    #[error("checkpoint has no frozen geometry head")]
    FrozenHeadMissing,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("SingleClass: metrics need both classes present")]
    SingleClass,

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
