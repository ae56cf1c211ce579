//! Crate-wide error type.

use crate::world::{NodeId, RequestId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node {0} is not part of the graph")]
    UnknownNode(NodeId),

    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),

    #[error("edge {from} -> {to} has non-positive length {length_m} m")]
    BadEdgeLength { from: NodeId, to: NodeId, length_m: f64 },

    #[error("no path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },

    #[error("provider set is empty")]
    NoProviders,

    #[error("request {0} already served")]
    AlreadyServed(RequestId),

    #[error("allocation plan assigns request {0} more than once")]
    DuplicateAssignment(RequestId),

    #[error("infeasible clustering: k * tau = {k} * {tau} exceeds {points} points")]
    InfeasibleClustering { k: usize, tau: usize, points: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed event stream: {0}")]
    MalformedEvents(String),

    #[error("{path}:{line}: {message}")]
    CsvRow { path: String, line: u64, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
