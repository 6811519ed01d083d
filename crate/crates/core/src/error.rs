use std::io;

use thiserror::Error;

/// Errors raised by the corpus, pruning, alignment, metric and oracle layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid `{field}`: {message}")]
    Validation { field: &'static str, message: String },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("empty skeleton")]
    EmptySkeleton,

    #[error("empty source")]
    EmptySource,

    #[error("not a subsequence")]
    NotSubsequence,

    #[error("no modifiers")]
    NoModifiers,

    #[error("{0}")]
    InvalidInput(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            field,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// True for failures that originate in a scoring backend rather than in the input data.
    pub fn is_oracle(&self) -> bool {
        matches!(self, Error::Oracle(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
