// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("malformed tensor archive: {0}")]
    Archive(String),

    #[error("missing tensor `{name}`")]
    MissingTensor { name: String },

    #[error("tensor `{name}` has shape {actual:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("tensor `{name}` contains a non-finite value")]
    NonFiniteWeight { name: String },

    #[error("tensor `{name}` has unsupported dtype {dtype}")]
    UnsupportedDtype { name: String, dtype: String },

    #[error("tokenizer: {0}")]
    Tokenizer(String),

    #[error("sequence of {len} tokens exceeds the model context of {max}")]
    ContextOverflow { len: usize, max: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("word span misaligned with sentence tokens: {0}")]
    Alignment(String),

    #[error("boundary mass before the word is zero; cannot renormalise")]
    DegenerateBoundary,

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("dataset row {row}: {msg}")]
    Dataset { row: u64, msg: String },

    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: u64, msg: String },

    #[error("missing feature: {0}")]
    MissingFeature(String),

    #[error("design matrix is singular even after ridge fallback")]
    SingularDesign,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
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

    /// Module that raised the error, used to qualify CLI messages.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => "io",
            Error::InvalidConfig(_)
            | Error::Archive(_)
            | Error::MissingTensor { .. }
            | Error::TensorShape { .. }
            | Error::NonFiniteWeight { .. }
            | Error::UnsupportedDtype { .. }
            | Error::Tokenizer(_)
            | Error::ContextOverflow { .. }
            | Error::EmptySequence
            | Error::IndexOutOfRange { .. }
            | Error::ShapeMismatch(_) => "lm-core",
            Error::Alignment(_) | Error::DegenerateBoundary | Error::DegenerateSeries(_) => {
                "measures"
            }
            Error::Dataset { .. } | Error::Lexicon { .. } => "dataset",
            Error::MissingFeature(_) | Error::SingularDesign | Error::Contract(_) => "stats",
            Error::MissingPrerequisite(_) => "experiments",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_)
            | Error::IndexOutOfRange { .. }
            | Error::Contract(_)
            | Error::MissingPrerequisite(_) => ErrorCategory::Usage,
            Error::DegenerateBoundary | Error::DegenerateSeries(_) | Error::SingularDesign => {
                ErrorCategory::Numerical
            }
            _ => ErrorCategory::Data,
        }
    }
}
