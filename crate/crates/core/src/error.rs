//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying filesystem read/write failed.
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// PLY header is missing required parts or uses an unsupported format.
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),

    /// PLY body ended before the declared element counts were satisfied.
    #[error("truncated PLY body: {0}")]
    TruncatedBody(String),

    /// PLY body contains a record that cannot be decoded.
    #[error("malformed PLY body: {0}")]
    MalformedBody(String),

    /// A parsed coordinate was NaN or infinite.
    #[error("non-finite coordinate in vertex record {index}")]
    NonFiniteValue { index: usize },

    /// OBJ face references a vertex index that does not exist.
    #[error("malformed OBJ face: {0}")]
    MalformedFace(String),

    /// Scene manifest violates its schema; `field` names the offender.
    #[error("manifest field `{field}`: {detail}")]
    SchemaViolation { field: String, detail: String },

    /// A 4x4 pose matrix is not a rigid transform.
    #[error("invalid pose: {0}")]
    InvalidPose(String),

    /// A rotation matrix failed the orthonormality/determinant check.
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    /// Similarity scale must be positive and finite.
    #[error("invalid scale {0}: must be positive and finite")]
    InvalidScale(f64),

    /// Axis-aligned box with min > max on some axis.
    #[error("invalid box: {0}")]
    InvalidBox(String),

    /// An operation that needs points received an empty cloud.
    #[error("empty point cloud: {0}")]
    EmptyCloud(String),

    /// Mesh has no vertices.
    #[error("mesh has no vertices")]
    EmptyMesh,

    /// Surface sampling requires at least one face with positive area.
    #[error("mesh has no faces with positive area")]
    NoArea,

    /// Similarity estimation needs at least three correspondence pairs.
    #[error("too few correspondence pairs: got {0}, need at least 3")]
    TooFewPairs(usize),

    /// Source points are (numerically) collinear; the rotation is unconstrained.
    #[error("degenerate correspondence configuration: {0}")]
    DegenerateConfiguration(String),

    /// Benchmark runs being compared do not cover the same scenes.
    #[error("scene set mismatch: {0}")]
    SceneSetMismatch(String),

    /// Benchmark runs being compared use different tolerance lists.
    #[error("tolerance mismatch: {0}")]
    ToleranceMismatch(String),

    /// Paired sequences have different lengths.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// A benchmark run must contain at least one scene.
    #[error("benchmark run contains no scenes")]
    EmptyRun,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(field: &str, detail: impl Into<String>) -> Self {
        Error::SchemaViolation {
            field: field.to_string(),
            detail: detail.into(),
        }
    }
}
