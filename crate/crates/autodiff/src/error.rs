use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("expected a scalar output, got a {rows}x{cols} tensor")]
    NonScalar { rows: usize, cols: usize },
    #[error("variable does not belong to this tape")]
    ForeignVar,
    #[error("primitive `{0}` has no second-order rule")]
    UnsupportedSecondOrder(&'static str),
    #[error("non-finite gradient; optimizer step skipped")]
    NonFiniteGradient,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
