use thiserror::Error;

/// Errors produced by geometry construction, validation, rendering and I/O.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid camera pose: {0}")]
    InvalidPose(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("empty point cloud")]
    EmptyPointCloud,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mesh has no UV coordinates")]
    MissingUvs,
    #[error("invalid texture: {0}")]
    InvalidTexture(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
