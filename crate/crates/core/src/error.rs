use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid detection: {0}")]
    Detection(String),

    #[error("node {0} does not exist in the graph")]
    UnknownNode(NodeId),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("frame {frame} is not later than the latest frame {latest} already in the graph")]
    StaleFrame { frame: u32, latest: u32 },

    #[error("instance has {detections} detections, above the enumeration limit of {limit}")]
    TooLarge { detections: usize, limit: usize },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
