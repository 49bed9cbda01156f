use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        row: u64,
        column: usize,
        value: String,
    },

    #[error("row {row}, column {column}: non-finite sample {value:?}")]
    NonFiniteCell {
        row: u64,
        column: usize,
        value: String,
    },

    #[error("row {row} has no column {column}")]
    MissingColumn { row: u64, column: usize },

    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },

    #[error("series is empty")]
    EmptySeries,

    #[error("{context}: need at least {needed} samples, got {got}")]
    TooShort {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("unsupported wavelet order {0} (supported: 1..=10 vanishing moments)")]
    UnsupportedWavelet(usize),

    #[error("scale {level} holds no coefficients")]
    EmptyScale { level: usize },

    #[error("need at least {needed} scales, got {got}")]
    InsufficientScales { needed: usize, got: usize },

    #[error("scale {level} has no usable leaders for q = {q}")]
    NoUsableLeaders { level: usize, q: f64 },

    #[error("structure function at scale {level}, q = {q} is not positive")]
    NonPositiveStructureFunction { level: usize, q: f64 },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("Toeplitz system is numerically singular at lag {lag}")]
    SingularToeplitz { lag: usize },

    #[error("bootstrap aborted: {failures} of {replicates} replicate estimates failed (first: {first})")]
    BootstrapAborted {
        failures: usize,
        replicates: usize,
        first: String,
    },

    #[error("surrogate ensemble aborted: {failures} of {count} surrogates failed (first: {first})")]
    SurrogateAborted {
        failures: usize,
        count: usize,
        first: String,
    },

    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
