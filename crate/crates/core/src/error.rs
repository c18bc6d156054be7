use std::io;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient free space: needed {needed} nodes, world has {available} free cells")]
    InsufficientFreeSpace { needed: usize, available: usize },
    #[error("node {node} lies inside an obstacle")]
    NodeInsideObstacle { node: usize },
    #[error("world has no coverable surface cells for this node set")]
    ZeroCoverableWorld,
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("observation conflict at cell {cell}")]
    ObservationConflict { cell: usize },
    #[error("no feasible action")]
    NoFeasibleAction,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("feature schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("no world in the ensemble is consistent with the belief")]
    NoConsistentWorld,
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported format version {found} (reader supports {supported})")]
    FormatVersion { found: String, supported: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(e.to_string())
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
