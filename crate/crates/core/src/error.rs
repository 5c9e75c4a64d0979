use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DfmError>;

#[derive(Debug, Error)]
pub enum DfmError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("image {width}x{height} is smaller than 16 pixels on one side")]
    ImageTooSmall { width: usize, height: usize },
    #[error("invalid feature map: {0}")]
    InvalidFeatureMap(String),
    #[error("invalid match set: {0}")]
    InvalidMatchSet(String),

    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("need at least 4 matches, got {0}")]
    TooFewMatches(usize),
    #[error("no non-degenerate minimal sample was found")]
    NoModelFound,
    #[error("invalid MSAC parameters: {0}")]
    InvalidParams(String),

    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("descriptor channel mismatch: {a} vs {b}")]
    ChannelMismatch { a: usize, b: usize },
    #[error("ratio threshold must lie in (0, 1], got {0}")]
    InvalidRatio(f64),

    #[error("layer 1 has no receptive window below it")]
    LayerUnderflow,
    #[error("layer mismatch: expected layer {expected}, found {found}")]
    LayerMismatch { expected: u8, found: u8 },
    #[error("initial match set is empty")]
    EmptyInitialSet,
    #[error("no mutual matches at the coarsest layer")]
    NoInitialMatches,
    #[error("stage-0 found {found} matches/inliers, need {required}")]
    InsufficientMatches { found: usize, required: usize },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("{}: bad magic, not a DFMT tensor", path.display())]
    BadMagic { path: PathBuf },
    #[error("layer {layer}: expected {expected:?} (width, height), found {found:?}")]
    DimMismatch {
        layer: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("unsupported DFMT dtype code {0}")]
    UnsupportedDtype(u32),
    #[error("unsupported DFMT tensor: {0}")]
    UnsupportedTensor(String),

    #[error("malformed sequence {sequence}: {reason}")]
    MalformedSequence { sequence: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),

    #[error("image decode error: {0}")]
    Decode(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
