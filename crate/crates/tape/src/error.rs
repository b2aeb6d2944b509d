use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("variable belongs to a different tape")]
    ForeignVar,
}

pub type Result<T> = std::result::Result<T, TapeError>;

pub(crate) fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> TapeError {
    TapeError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> TapeError {
    TapeError::Invalid {
        op,
        msg: msg.into(),
    }
}
