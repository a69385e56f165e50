use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("point cloud too small: need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("normal count {normals} does not match point count {points}")]
    NormalCountMismatch { points: usize, normals: usize },

    #[error("normal {index} is not unit length (norm = {norm})")]
    NonUnitNormal { index: usize, norm: f64 },

    #[error("plane normal is not unit length (norm = {0})")]
    NonUnitPlaneNormal(f64),

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("degenerate direction distribution")]
    DegenerateDirections,

    #[error("{0}")]
    DegenerateHull(String),

    #[error("insufficient feature matches: {0} (need at least 3)")]
    InsufficientMatches(usize),

    #[error("registration destroyed reflection structure: {0}")]
    ReflectionLost(String),

    #[error("no symmetry plane candidates")]
    NoCandidates,

    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("infeasible damage spec: {0}")]
    InfeasibleDamage(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
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
