use thiserror::Error;

use mfmgcn_tape::TapeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error("station {station} factor {factor} has no observed values to interpolate from")]
    Unfillable { station: String, factor: String },
    #[error("factor {factor} has zero variance{}", station.as_ref().map(|s| format!(" at station {s}")).unwrap_or_default())]
    ZeroVariance {
        factor: String,
        station: Option<String>,
    },
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("model has not been fitted")]
    NotFitted,
    #[error("file format error: {0}")]
    Format(String),
    #[error("unsupported or incomplete file version: {0}")]
    Version(String),
    #[error("non-finite loss at epoch {epoch}, step {step}: {value}")]
    NonFinite { epoch: usize, step: usize, value: f64 },
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Structural(_)
                | Error::Schema(_)
                | Error::Config(_)
                | Error::Shape { .. }
                | Error::Format(_)
                | Error::Version(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
