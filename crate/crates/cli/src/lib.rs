//! Command-line front end for `aoi_relay`.

pub mod args;
pub mod commands;
pub mod compute;
pub mod record;

use std::fmt;

use aoi_relay::Error;

/// A failed command with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const COMPARISON: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const SINGULAR: u8 = 3;

    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::NearSingular { .. } => Failure::new(Self::SINGULAR, format!("{err} (`--method oracle`)")),
            Error::OutOfRange { .. }
            | Error::Unstable { .. }
            | Error::BadState { .. }
            | Error::CapTooSmall { .. }
            | Error::CapTooLarge { .. }
            | Error::StateBudget { .. }
            | Error::InvalidConfig(_) => Failure::new(Self::USAGE, err.to_string()),
            Error::TailTooHeavy { .. } | Error::NoConvergence { .. } | Error::InvalidPmf(_) => {
                Failure::new(Self::COMPARISON, err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::new(Self::COMPARISON, format!("output error: {err}"))
    }
}
