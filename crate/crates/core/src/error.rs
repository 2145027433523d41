use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no samples")]
    NoSamples,
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("radius must be positive and at most 1, got {0}")]
    InvalidRadius(f64),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unknown symbol at index {index}")]
    UnknownSymbol { index: usize },
    #[error("operation requires a continuous nominal distribution")]
    DiscontinuousCenter,
    #[error("distribution is outside the ball (Levy distance {distance} > radius {radius})")]
    OutsideBall { distance: f64, radius: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
