use std::path::PathBuf;

use thiserror::Error;

use crate::imgproc::TargetState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("patch window lies entirely outside the frame")]
    OutOfView,

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("tracking lost at frame {frame}: every particle is out of view")]
    TrackingLost { frame: usize, last_state: TargetState },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("malformed dataset {path}: {frames} frames but {boxes} ground-truth boxes")]
    MalformedDataset {
        path: PathBuf,
        frames: usize,
        boxes: usize,
    },

    #[error("malformed dataset {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
