use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate type name `{0}`")]
    DuplicateType(String),
    #[error("duplicate relation name `{0}`")]
    DuplicateRelation(String),
    #[error("type `{0}` has no entities")]
    EmptyType(String),
    #[error("duplicate entity id `{id}` in type `{ty}`")]
    DuplicateEntity { ty: String, id: String },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}`: unknown entity id `{id}` for type `{ty}`")]
    UnknownEntity {
        relation: String,
        ty: String,
        id: String,
    },
    #[error("relation `{relation}`: duplicate edge ({src}, {dst})")]
    DuplicateEdge {
        relation: String,
        src: String,
        dst: String,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value in type `{ty}` at iteration {iteration}")]
    NonFinite { ty: String, iteration: usize },
    #[error("contraction bound violated for type `{ty}`: c * sum(w * |W|_1^2) = {bound}")]
    ContractionBound { ty: String, bound: f64 },
    #[error("convergence conditions not met: {0}")]
    Conditions(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by file access or file contents rather than
    /// by the numerical work.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. }
        )
    }
}
