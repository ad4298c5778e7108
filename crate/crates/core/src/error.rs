use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("record {id}: {message}")]
    Validation { id: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("not enough {class} items: need {needed}, have {available}")]
    Shortfall {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("unknown feature block {name:?}; available: {}", available.join(", "))]
    MissingBlock { name: String, available: Vec<String> },

    #[error("bad model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
