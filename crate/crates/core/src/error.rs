use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} has {count} vertices; only triangles are supported")]
    NonTriangleFace { face: usize, count: usize },
    #[error("face {face} references vertex {index}, mesh has {vertex_count} vertices")]
    FaceIndex {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("geodesic query needs at least one source vertex")]
    NoSources,
    #[error("face mask has length {got}, mesh has {expected} faces")]
    MaskLength { expected: usize, got: usize },
    #[error("face mask has no included/excluded boundary")]
    EmptyBoundary,
    #[error("inconsistent face mask: {0}")]
    InconsistentMask(String),
    #[error("field does not belong to this mesh (checksum {field:016x} vs mesh {mesh:016x})")]
    ChecksumMismatch { field: u64, mesh: u64 },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("correspondence covariance is singular; use a positive regularizer")]
    SingularSystem,
    #[error("statistics need at least 2 shapes, got {0}")]
    TooFewShapes(usize),
    #[error("mode index {mode} out of range ({available} modes)")]
    ModeOutOfRange { mode: usize, available: usize },
    #[error("sine mask is degenerate (all faces on one side)")]
    DegenerateMask,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape count mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
