use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::RelayPolicy;

/// Age vector of the constituted Markov process.
///
/// `n` is the receiver AoI, `m` the age of the packet the relay is forwarding and
/// `l` the age of the buffered packet; `0` marks an empty slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeState {
    One(u32),
    Two(u32, u32),
    Three(u32, u32, u32),
}

impl AgeState {
    pub fn dimension(self) -> usize {
        match self {
            AgeState::One(_) => 1,
            AgeState::Two(..) => 2,
            AgeState::Three(..) => 3,
        }
    }

    /// Receiver AoI.
    pub fn aoi(self) -> u32 {
        match self {
            AgeState::One(n) | AgeState::Two(n, _) | AgeState::Three(n, _, _) => n,
        }
    }

    /// Components padded with zeros to length three.
    pub fn components(self) -> (u32, u32, u32) {
        match self {
            AgeState::One(n) => (n, 0, 0),
            AgeState::Two(n, m) => (n, m, 0),
            AgeState::Three(n, m, l) => (n, m, l),
        }
    }

    /// The state with AoI 1 and an empty relay, reached on every direct delivery.
    pub fn reset(policy: RelayPolicy) -> Self {
        Self::from_components(policy, 1, 0, 0)
    }

    pub fn from_components(policy: RelayPolicy, n: u32, m: u32, l: u32) -> Self {
        match policy.state_dimension() {
            1 => AgeState::One(n),
            2 => AgeState::Two(n, m),
            _ => AgeState::Three(n, m, l),
        }
    }

    /// Ordering constraints: `n >= 1`, `n > m` when `m >= 1`, `m > l` when `l >= 1`, and `m = 0` forces `l = 0`.
    pub fn is_well_formed(self) -> bool {
        let (n, m, l) = self.components();
        n >= 1 && (m == 0 || n > m) && (l == 0 || (m > l))
    }

    /// Rejects malformed states and states whose dimension does not match `policy`.
    pub fn check(self, policy: RelayPolicy) -> Result<()> {
        if self.dimension() != policy.state_dimension() || !self.is_well_formed() {
            return Err(Error::BadState { state: self.to_string(), policy: policy.name().into() });
        }
        Ok(())
    }
}

impl fmt::Display for AgeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeState::One(n) => write!(f, "({n})"),
            AgeState::Two(n, m) => write!(f, "({n},{m})"),
            AgeState::Three(n, m, l) => write!(f, "({n},{m},{l})"),
        }
    }
}
