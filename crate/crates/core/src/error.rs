use std::path::PathBuf;

use thiserror::Error;

use crate::nli::NliError;
use crate::responder::ResponderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path}: line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate record id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("record {record_id:?} is missing its {variant} score")]
    IncompleteRecord { record_id: String, variant: String },

    #[error("image {0:?} is not available")]
    MissingImage(String),

    #[error("run produced no complete records")]
    EmptyRun,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Responder(#[from] ResponderError),

    #[error(transparent)]
    Nli(#[from] NliError),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
