//! System parameters, relay policies and parameter validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative threshold below which a closed-form denominator counts as zero.
pub const SINGULARITY_EPS: f64 = 1e-9;

/// Per-slot probabilities of the relay-assisted system.
///
/// `p` is the Bernoulli arrival probability at the source; `p1`, `p2` and `p3`
/// are the success probabilities of the source–destination, source–relay and
/// relay–destination links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    pub p: T,
    pub p1: T,
    pub p2: T,
    pub p3: T,
}

impl<T: Scalar> SystemParams<T> {
    pub fn new(p: T, p1: T, p2: T, p3: T) -> Self {
        Self { p, p1, p2, p3 }
    }

    /// Probability that a fresh packet reaches the destination over the direct link.
    pub fn direct_success(&self) -> T {
        self.p * self.p1
    }

    /// Probability that neither the destination nor the relay hears from the source.
    pub fn delta(&self) -> T {
        T::one() - self.p * (self.p1 + self.p2 - self.p1 * self.p2)
    }

    /// Probability that only the relay hears from the source.
    pub fn eta(&self) -> T {
        self.p * (T::one() - self.p1) * self.p2
    }

    /// Largest geometric ratio governing the decay of the AoI tail under `policy`.
    pub fn dominant_ratio(&self, policy: RelayPolicy) -> T {
        let miss = T::one() - self.direct_success();
        match policy {
            RelayPolicy::NoRelay => miss,
            _ => self.delta().max(miss * (T::one() - self.p3)),
        }
    }

    pub fn cast<U: Scalar>(&self) -> SystemParams<U> {
        SystemParams {
            p: U::lit(self.p.as_f64()),
            p1: U::lit(self.p1.as_f64()),
            p2: U::lit(self.p2.as_f64()),
            p3: U::lit(self.p3.as_f64()),
        }
    }

    fn named(&self) -> [(&'static str, T); 4] {
        [("p", self.p), ("p1", self.p1), ("p2", self.p2), ("p3", self.p3)]
    }
}

impl<T: fmt::Display> fmt::Display for SystemParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={} P1={} P2={} P3={}", self.p, self.p1, self.p2, self.p3)
    }
}

/// The four system variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelayPolicy {
    /// Direct link only; `p2` and `p3` are ignored.
    #[serde(rename = "no-relay")]
    NoRelay,
    /// Bufferless relay whose packet is replaced by any fresher arrival.
    #[serde(rename = "nb-preempt")]
    NoBufferPreempt,
    /// Bufferless relay that rejects arrivals while it holds a packet.
    #[serde(rename = "nb-no-preempt")]
    NoBufferNoPreempt,
    /// Relay with one transmit slot plus a size-1 buffer refreshed by arrivals.
    #[serde(rename = "buffer")]
    BufferPreempt,
}

impl RelayPolicy {
    pub const ALL: [RelayPolicy; 4] = [
        RelayPolicy::NoRelay,
        RelayPolicy::NoBufferPreempt,
        RelayPolicy::NoBufferNoPreempt,
        RelayPolicy::BufferPreempt,
    ];

    pub const RELAYED: [RelayPolicy; 3] = [
        RelayPolicy::NoBufferPreempt,
        RelayPolicy::NoBufferNoPreempt,
        RelayPolicy::BufferPreempt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelayPolicy::NoRelay => "no-relay",
            RelayPolicy::NoBufferPreempt => "nb-preempt",
            RelayPolicy::NoBufferNoPreempt => "nb-no-preempt",
            RelayPolicy::BufferPreempt => "buffer",
        }
    }

    /// Number of components in the age-state vector.
    pub fn state_dimension(self) -> usize {
        match self {
            RelayPolicy::NoRelay => 1,
            RelayPolicy::NoBufferPreempt | RelayPolicy::NoBufferNoPreempt => 2,
            RelayPolicy::BufferPreempt => 3,
        }
    }
}

impl fmt::Display for RelayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelayPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        RelayPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!("unknown policy `{s}` (expected no-relay, nb-preempt, nb-no-preempt or buffer)")
            })
    }
}

/// A quantity the closed forms divide by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Denominator {
    /// `(1 - p P1) P3 - p (1 - P1) P2`, equal to `delta - (1 - p P1)(1 - P3)`.
    PreemptGap,
    /// `1 - P3`.
    RelayLossComplement,
    /// `eta = p (1 - P1) P2`.
    RelayAdmission,
    /// `delta - (delta + eta)(1 - P3)`.
    BufferGap,
    /// `(1 - delta (1 - P3))^2 - delta eta P3 (1 - P3)`, the normaliser of the empty-relay probability.
    EmptyRelayNorm,
}

impl Denominator {
    pub const ALL: [Denominator; 5] = [
        Denominator::PreemptGap,
        Denominator::RelayLossComplement,
        Denominator::RelayAdmission,
        Denominator::BufferGap,
        Denominator::EmptyRelayNorm,
    ];

    pub fn expression(self) -> &'static str {
        match self {
            Denominator::PreemptGap => "(1-pP1)P3 - p(1-P1)P2",
            Denominator::RelayLossComplement => "1 - P3",
            Denominator::RelayAdmission => "p(1-P1)P2",
            Denominator::BufferGap => "delta - (delta+eta)(1-P3)",
            Denominator::EmptyRelayNorm => "(1-delta(1-P3))^2 - delta*eta*P3(1-P3)",
        }
    }

    /// Whether the closed forms of `policy` divide by this quantity.
    pub fn affects(self, policy: RelayPolicy) -> bool {
        use RelayPolicy::*;
        match self {
            Denominator::PreemptGap => matches!(policy, NoBufferPreempt | NoBufferNoPreempt),
            Denominator::RelayLossComplement => matches!(policy, NoBufferPreempt | BufferPreempt),
            Denominator::RelayAdmission | Denominator::BufferGap | Denominator::EmptyRelayNorm => {
                policy == BufferPreempt
            }
        }
    }

    /// Value of the denominator and the magnitude it is compared against.
    pub fn evaluate<T: Scalar>(self, params: &SystemParams<T>) -> (T, T) {
        let one = T::one();
        let delta = params.delta();
        let eta = params.eta();
        let p3 = params.p3;
        let difference = |a: T, b: T| (a - b, a.abs().max(b.abs()));
        match self {
            Denominator::PreemptGap => difference((one - params.direct_success()) * p3, eta),
            Denominator::RelayLossComplement => (one - p3, one),
            Denominator::RelayAdmission => (eta, one),
            Denominator::BufferGap => difference(delta, (delta + eta) * (one - p3)),
            Denominator::EmptyRelayNorm => {
                let lead = one - delta * (one - p3);
                difference(lead * lead, delta * eta * p3 * (one - p3))
            }
        }
    }

    pub fn is_singular<T: Scalar>(self, params: &SystemParams<T>) -> bool {
        let (value, scale) = self.evaluate(params);
        value.abs() <= T::lit(SINGULARITY_EPS) * scale
    }
}

/// Parameters that passed range and stability checks.
///
/// Near-singular closed-form denominators do not prevent construction (the
/// oracle and simulator handle them fine); analytic routines call
/// [`ValidatedParams::ensure_regular`] for the policy they evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams<T> {
    inner: SystemParams<T>,
}

impl<T: Scalar> ValidatedParams<T> {
    /// Checks that every probability lies in `[0, 1]` and that `p` and `p1` are positive.
    pub fn new(params: SystemParams<T>) -> Result<Self> {
        for (name, value) in params.named() {
            if !(value >= T::zero() && value <= T::one()) {
                return Err(Error::OutOfRange { name, value: value.as_f64() });
            }
        }
        for (name, value) in [("p", params.p), ("p1", params.p1)] {
            if value <= T::zero() {
                return Err(Error::Unstable { name });
            }
        }
        Ok(Self { inner: params })
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.inner
    }

    /// Denominators that vanish (relative to [`SINGULARITY_EPS`]) for `policy`.
    pub fn singular_denominators(&self, policy: RelayPolicy) -> Vec<Denominator> {
        Denominator::ALL
            .into_iter()
            .filter(|d| d.affects(policy) && d.is_singular(&self.inner))
            .collect()
    }

    pub fn ensure_regular(&self, policy: RelayPolicy) -> Result<()> {
        match self.singular_denominators(policy).first() {
            None => Ok(()),
            Some(&which) => Err(Error::NearSingular {
                which,
                value: which.evaluate(&self.inner).0.as_f64(),
            }),
        }
    }
}

impl<T> std::ops::Deref for ValidatedParams<T> {
    type Target = SystemParams<T>;

    fn deref(&self) -> &SystemParams<T> {
        &self.inner
    }
}

/// Full validation: ranges, stability, and every closed-form denominator of every policy.
pub fn validate<T: Scalar>(params: &SystemParams<T>) -> Result<ValidatedParams<T>> {
    let validated = ValidatedParams::new(*params)?;
    for policy in RelayPolicy::RELAYED {
        validated.ensure_regular(policy)?;
    }
    Ok(validated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_setting() -> SystemParams<f64> {
        SystemParams::new(0.4, 0.25, 1.0 / 3.0, 1.0 / 3.0)
    }

    #[test]
    fn reference_setting_is_valid() {
        let v = validate(&reference_setting()).unwrap();
        assert!((v.delta() - 0.8).abs() < 1e-15);
        assert!((v.eta() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_arrivals_is_unstable() {
        let err = validate(&SystemParams::new(0.0, 0.5, 0.5, 0.5)).unwrap_err();
        assert_eq!(err, Error::Unstable { name: "p" });
        let err = validate(&SystemParams::new(0.5, 0.0, 0.5, 0.5)).unwrap_err();
        assert_eq!(err, Error::Unstable { name: "p1" });
    }

    #[test]
    fn out_of_range_names_the_parameter() {
        let err = validate(&SystemParams::new(0.5, 0.5, 1.5, 0.5)).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { name: "p2", .. }));
        let err = validate(&SystemParams::new(0.5, 0.5, 0.5, f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { name: "p3", .. }));
    }

    #[test]
    fn balanced_relay_is_near_singular() {
        // (1 - p P1) P3 = p (1 - P1) P2 with p = 1/2, P1 = 1/2, P2 = 3/4 → P3 = 1/4.
        let params = SystemParams::new(0.5, 0.5, 0.75, 0.25);
        let err = validate(&params).unwrap_err();
        assert!(matches!(err, Error::NearSingular { which: Denominator::PreemptGap, .. }));
        let v = ValidatedParams::new(params).unwrap();
        assert!(v.ensure_regular(RelayPolicy::NoRelay).is_ok());
        assert!(v.ensure_regular(RelayPolicy::NoBufferNoPreempt).is_err());
    }

    #[test]
    fn links_with_saturated_source_are_singular() {
        let params = SystemParams::new(1.0, 0.25, 1.0 / 3.0, 1.0 / 3.0);
        assert!(Denominator::PreemptGap.is_singular(&params));
    }

    #[test]
    fn inert_relay_only_blocks_buffer_forms() {
        let v = ValidatedParams::new(SystemParams::new(0.5, 0.3, 0.0, 0.6)).unwrap();
        assert!(v.ensure_regular(RelayPolicy::NoBufferPreempt).is_ok());
        assert_eq!(v.singular_denominators(RelayPolicy::BufferPreempt), vec![Denominator::RelayAdmission]);
    }

    #[test]
    fn policy_names_round_trip() {
        for policy in RelayPolicy::ALL {
            assert_eq!(policy.name().parse::<RelayPolicy>().unwrap(), policy);
        }
        assert!("relay".parse::<RelayPolicy>().is_err());
    }
}
