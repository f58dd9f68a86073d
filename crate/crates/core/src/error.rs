use std::fmt;

use thiserror::Error;

use crate::params::Denominator;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be positive: with no direct deliveries the age grows without bound")]
    Unstable { name: &'static str },

    #[error("closed form is near-singular: {which} = {value:e}; use the Markov-chain oracle instead")]
    NearSingular { which: Denominator, value: f64 },

    #[error("tail mass {tail_mass:e} exceeds {limit:e}; moments from this PMF are unreliable")]
    TailTooHeavy { tail_mass: f64, limit: f64 },

    #[error("state {state} is not a valid {policy} age-state")]
    BadState { state: String, policy: String },

    #[error("truncation cap {cap} is too small (minimum {min})")]
    CapTooSmall { cap: u32, min: u32 },

    #[error("truncation cap {cap} exceeds the per-dimension ceiling {max}")]
    CapTooLarge { cap: u32, max: u32 },

    #[error("chain with cap {cap} would have {states} states, above the limit of {limit}")]
    StateBudget { cap: u32, states: u64, limit: u64 },

    #[error("stationary solve stopped after {iterations} sweeps with residual {residual:e} (target {tol:e})")]
    NoConvergence { iterations: usize, residual: f64, tol: f64 },

    #[error("invalid PMF: {0}")]
    InvalidPmf(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.expression())
    }
}
