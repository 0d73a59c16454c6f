use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: file is empty")]
    EmptyFile { path: PathBuf },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: cannot parse row {row}, column `{column}`: {value:?}")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("OULAD: {0}")]
    Oulad(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class `{0}` is absent")]
    ClassAbsent(crate::dataset::Label),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all features have zero range width")]
    AllWidthsZero,

    #[error("not enough candidates: requested {requested}, only {available} available")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("no valid counterfactual: {0}")]
    NoCounterfactual(String),

    #[error("model format: line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
