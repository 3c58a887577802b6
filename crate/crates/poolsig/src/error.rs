//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by parsing, validation, and experiment execution.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse {
        /// 1-based line number in the input stream.
        line: usize,
        /// Description of what went wrong.
        msg: String,
    },

    /// Structurally valid input that violates an invariant (duplicates,
    /// unknown ids, out-of-range parameters).
    #[error("validation error: {0}")]
    Validation(String),

    /// Bad configuration: unknown keys, out-of-range values, inconsistent
    /// system or topic lists.
    #[error("configuration error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// An experiment stage failed; wraps the underlying error with the
    /// stage name so the CLI can report where the pipeline aborted.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        /// Pipeline stage that failed (e.g. "parse-runs", "significance").
        stage: &'static str,
        /// The underlying error.
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the name of the experiment stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True if the root cause is an I/O failure (exit code 2 territory);
    /// everything else is treated as a validation failure (exit code 1).
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
