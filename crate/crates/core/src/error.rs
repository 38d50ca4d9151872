//! Error type shared by every module in the core crate.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// Malformed argument: shape mismatch, non-finite values, short signals.
    InvalidInput(String),
    /// Configuration violates an invariant (geometry, STFT layout, counts).
    InvalidConfig(String),
    /// Scene sampling could not satisfy the angular-separation constraint.
    InfeasibleScene(String),
    /// Training produced a non-finite loss or parameters.
    TrainingDiverged(String),
    /// Operation needs state that is missing or stale.
    InvalidState(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::InvalidConfig(m) => write!(f, "invalid config: {m}"),
            Error::InfeasibleScene(m) => write!(f, "infeasible scene: {m}"),
            Error::TrainingDiverged(m) => write!(f, "training diverged: {m}"),
            Error::InvalidState(m) => write!(f, "invalid state: {m}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! invalid_input {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}

macro_rules! invalid_config {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidConfig(alloc::format!($($arg)*))
    };
}

pub(crate) use {invalid_config, invalid_input};
