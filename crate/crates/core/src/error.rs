use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("png encoding error: {0}")]
    Png(#[from] png::EncodingError),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid class id {0}")]
    InvalidClass(u8),
    #[error("time {t} outside egomotion track span [{start}, {end}]")]
    OutsideTrack { t: f64, start: f64, end: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("prediction not normalized at cell {cell}: sum {sum}")]
    Unnormalized { cell: usize, sum: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
