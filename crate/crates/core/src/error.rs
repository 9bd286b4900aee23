use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape {
        expected: alloc::string::String,
        actual: alloc::string::String,
    },
    #[error("shape sampling did not converge after {attempts} attempts")]
    SamplingExhausted { attempts: usize },
    #[error("degenerate shape: vertices {a} and {b} are {distance:.3} px apart")]
    DegenerateShape { a: usize, b: usize, distance: f64 },
    #[error("invalid configuration: {0}")]
    Config(alloc::string::String),
    #[error("image of {size} px is smaller than the {window} px window at the coarsest scale")]
    ImageTooSmall { size: usize, window: usize },
    #[error("attention channel {channel} has no positive mass")]
    EmptyChannel { channel: usize },
    #[error("nothing to evaluate: the split is empty")]
    EmptyDataset,
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
}

pub(crate) fn shape_err(expected: impl core::fmt::Debug, actual: impl core::fmt::Debug) -> Error {
    Error::Shape {
        expected: alloc::format!("{expected:?}"),
        actual: alloc::format!("{actual:?}"),
    }
}
