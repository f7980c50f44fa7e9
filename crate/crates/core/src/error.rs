use thiserror::Error;

/// Errors produced by the reconstruction, verification and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("config error: {0}")]
    Config(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate neighborhood around point {0}: covariance is rank deficient")]
    DegenerateNeighborhood(usize),

    #[error("degenerate patch: {0}")]
    DegeneratePatch(String),

    #[error("unfittable patch: best inlier ratio {best:.4} below required {required:.4}")]
    UnfittablePatch { best: f64, required: f64 },

    #[error("cylinder fitting requires normals; run estimate_normals first")]
    MissingNormals,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cosine distance undefined for a zero vector")]
    ZeroVector,

    #[error("triplet loss needs at least two valid masks, got {0}")]
    TooFewMasks(usize),

    #[error("no labeled patches")]
    NoLabeledPatches,

    #[error("empty model")]
    EmptyModel,

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
