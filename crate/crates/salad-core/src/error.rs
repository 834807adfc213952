//! Error type shared by the detector core.

use core::fmt;

/// Everything that can go wrong inside the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration field violates its invariant.
    InvalidConfig(&'static str),
    /// Training window shorter than the two points needed for one input/target pair.
    WindowTooShort { len: usize, min: usize },
    /// Prediction input was empty.
    EmptyInput,
    /// Training loss became NaN or infinite.
    NonFiniteLoss { epoch: usize },
    /// A non-finite value reached a computation that requires finite input.
    NonFiniteInput { t: usize },
    /// Paired observed/predicted windows differ in length.
    LengthMismatch { observed: usize, predicted: usize },
    /// Not enough history to derive a threshold.
    InsufficientHistory { len: usize, min: usize },
    /// A point arrived with an index other than the next expected one.
    OutOfOrderPoint { expected: usize, got: usize },
    /// A label window with start past end.
    InvalidWindow { s: usize, e: usize },
    /// A scalar argument outside its documented range.
    OutOfRange(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::WindowTooShort { len, min } => {
                write!(f, "training window has {len} points, need at least {min}")
            }
            Error::EmptyInput => write!(f, "prediction input is empty"),
            Error::NonFiniteLoss { epoch } => {
                write!(f, "training loss became non-finite at epoch {epoch}")
            }
            Error::NonFiniteInput { t } => write!(f, "non-finite value at index {t}"),
            Error::LengthMismatch {
                observed,
                predicted,
            } => write!(
                f,
                "window length mismatch: {observed} observed vs {predicted} predicted"
            ),
            Error::InsufficientHistory { len, min } => {
                write!(f, "threshold needs at least {min} history entries, have {len}")
            }
            Error::OutOfOrderPoint { expected, got } => {
                write!(f, "expected point index {expected}, got {got}")
            }
            Error::InvalidWindow { s, e } => {
                write!(f, "label window start {s} is past end {e}")
            }
            Error::OutOfRange(what) => write!(f, "argument out of range: {what}"),
        }
    }
}

impl core::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
