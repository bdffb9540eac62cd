use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in `{operand}`: expected {expected}, found {found}")]
    Dimension {
        operand: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("length mismatch: {left} predictions vs {right} targets")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("series has zero range (min == max == {0})")]
    ZeroRange(f64),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("series of length {len} is too short for look_back {look_back}")]
    SeriesTooShort { len: usize, look_back: usize },
    #[error("split fraction {fraction} of {samples} samples leaves one side empty")]
    DegenerateSplit { fraction: f64, samples: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{what} index {index} out of range (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },
}
