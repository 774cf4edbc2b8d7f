use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(
        "views disagree on sample count: view '{view}' has {found} samples, expected {expected}"
    )]
    MismatchedSampleCount {
        view: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in view '{view}' at row {row}, column {col}")]
    NonFiniteValue {
        view: String,
        row: usize,
        col: usize,
    },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("k = {k} must be in [1, n-1] for n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("local Gram system{} is numerically singular", fmt_sample(.sample))]
    DegenerateNeighborhood { sample: Option<usize> },

    #[error("symmetric eigensolver did not converge for a {n}x{n} matrix")]
    EigenFailure { n: usize },

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("query {query} has an empty relevant set")]
    EmptyRelevantSet { query: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

fn fmt_sample(sample: &Option<usize>) -> String {
    sample
        .map(|i| format!(" for sample {i}"))
        .unwrap_or_default()
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self.root() {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::MismatchedSampleCount { .. }
            | Error::NonFiniteValue { .. }
            | Error::TooFewSamples(_)
            | Error::EmptyRelevantSet { .. } => ErrorCategory::Data,
            Error::InvalidSpec(_) | Error::InvalidConfig(_) | Error::KTooLarge { .. } => {
                ErrorCategory::Usage
            }
            Error::DegenerateNeighborhood { .. } | Error::EigenFailure { .. } => {
                ErrorCategory::Numeric
            }
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }

    /// Short stable identifier for the error kind.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::MismatchedSampleCount { .. } => "mismatched_sample_count",
            Error::NonFiniteValue { .. } => "non_finite_value",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::InvalidConfig(_) => "invalid_config",
            Error::KTooLarge { .. } => "k_too_large",
            Error::DegenerateNeighborhood { .. } => "degenerate_neighborhood",
            Error::EigenFailure { .. } => "eigen_failure",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::EmptyRelevantSet { .. } => "empty_relevant_set",
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}
