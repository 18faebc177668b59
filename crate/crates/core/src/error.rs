use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("zero range between platform and point at slow time {0}")]
    ZeroRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("scatterer outside the image window: {0}")]
    OutsideWindow(String),
    #[error("segmentation exceeds the available {0}")]
    SegmentationTooLarge(String),
    #[error("data sampling is not aligned with the segmentation: {0}")]
    Misaligned(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("solver diverged at iteration {iteration} (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("regime check failed: {0}")]
    RegimeFail(String),
    #[error("file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
