use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] mesh4d_core::GeometryError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stereo estimation failed: {0}")]
    Stereo(String),
    #[error("optimization diverged: {0}")]
    Divergence(String),
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("no views supplied")]
    NoViews,
    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("export failed: {0}")]
    Export(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn at_frame(self, frame: usize) -> PipelineError {
        PipelineError::Frame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
