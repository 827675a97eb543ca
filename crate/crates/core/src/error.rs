use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid hyperparameters, schedule geometry or config file contents.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside an operation's domain (zero vector, non-one-hot target, ...).
    #[error("input error: {0}")]
    Input(String),

    /// The selected similarities sum to (almost) zero so the weighted average is undefined.
    #[error("degenerate aggregation: similarity sum {sum:e} is within tolerance of zero{}", batch_suffix(*.batch))]
    DegenerateAggregation { sum: f64, batch: Option<usize> },

    /// A parameter or output became NaN or infinite.
    #[error("non-finite value in {what}{}", batch_suffix(*.batch))]
    NonFinite { what: String, batch: Option<usize> },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn batch_suffix(batch: Option<usize>) -> String {
    batch.map(|b| format!(" (batch {b})")).unwrap_or_default()
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag a model error with the batch index it occurred at, if it does not carry one yet.
    pub fn at_batch(self, index: usize) -> Self {
        match self {
            Error::DegenerateAggregation { sum, batch: None } => Error::DegenerateAggregation {
                sum,
                batch: Some(index),
            },
            Error::NonFinite { what, batch: None } => Error::NonFinite {
                what,
                batch: Some(index),
            },
            other => other,
        }
    }

    /// True for errors that come from numerics rather than inputs or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateAggregation { .. } | Error::NonFinite { .. }
        )
    }
}
