//! Files in and out: graph files, configuration, manifests, CSV and SVG.

pub mod config;
pub mod csv_out;
pub mod graph_file;
pub mod manifest;
pub mod svg;

use std::path::Path;

use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid graph: {detail}")]
    Graph { source: GraphError, detail: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            IoError::Parse { message, .. } => IoError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        }
    }

    /// Stable name for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Parse { .. } => "ParseError",
            IoError::SchemaMismatch(_) => "SchemaMismatch",
            IoError::Graph { source, .. } => match source {
                GraphError::DisconnectedGraph { .. } => "DisconnectedGraph",
                GraphError::DuplicateEdge(..) => "DuplicateEdge",
                GraphError::NegativeAttribute { .. } => "NegativeAttribute",
                _ => "InvalidGraph",
            },
            IoError::Io { .. } => "IoFailure",
            IoError::Invalid(_) => "InvalidInput",
        }
    }
}
