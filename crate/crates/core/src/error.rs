use std::fmt;

use serde::{Deserialize, Serialize};

/// A single validation failure, addressed by a JSON-pointer-like field path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl ValidationIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("junction measures differ: {}", .0.join("; "))]
    JunctionMismatch(Vec<String>),

    #[error("validation failed: {}", fmt_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("lattice too large: {count} candidate ensembles (limit {limit})")]
    LatticeTooLarge { count: u128, limit: u128 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidEnsemble(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
