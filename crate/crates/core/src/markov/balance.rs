//! Plug-in residuals of the stationary balance equations, written line by line
//! with the coefficients exactly as they appear in the published systems.

use crate::params::RelayPolicy;
use crate::scalar::Scalar;

use super::{AgeState, StationaryDistribution};

/// One balance equation evaluated at the solved vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResidual<T> {
    /// Which line of the system, e.g. `"n>m>=2"`.
    pub line: &'static str,
    pub state: AgeState,
    pub lhs: T,
    pub rhs: T,
}

impl<T: Scalar> BalanceResidual<T> {
    pub fn residual(&self) -> T {
        (self.lhs - self.rhs).abs()
    }
}

/// Evaluates every balance equation whose left-hand state has components at most `max_index`.
///
/// Infinite sums are cut at the chain's cap. The no-relay chain has no such system
/// and yields an empty list.
pub fn balance_residuals<T: Scalar>(dist: &StationaryDistribution<'_, T>, max_index: u32) -> Vec<BalanceResidual<T>> {
    let chain = dist.chain();
    let cap = chain.cap();
    let top = max_index.min(cap);
    let params = *chain.params();
    let one = T::one();
    let (p, p1, p2, p3) = (params.p, params.p1, params.p2, params.p3);
    let pi2 = |n: u32, m: u32| dist.prob(AgeState::Two(n, m));
    let pi3 = |n: u32, m: u32, l: u32| dist.prob(AgeState::Three(n, m, l));
    // States beyond the window are represented by the overflow mass.
    let total = dist.iter().fold(dist.overflow_mass(), |acc, (_, w)| acc + w);
    let sum = |range: std::ops::RangeInclusive<u32>, f: &dyn Fn(u32) -> T| range.fold(T::zero(), |acc, k| acc + f(k));
    let mut out = Vec::new();
    let mut push = |line, state, lhs, rhs| out.push(BalanceResidual { line, state, lhs, rhs });

    match chain.policy() {
        RelayPolicy::NoRelay => {}
        RelayPolicy::NoBufferPreempt => {
            let stay = (one - p) * (one - p3) + p * (one - p1) * (one - p2) * (one - p3);
            let admit = p * (one - p1) * p2;
            for n in 3..=top {
                for m in 2..n {
                    push("n>m>=2", AgeState::Two(n, m), pi2(n, m), pi2(n - 1, m - 1) * stay);
                }
                let rhs = pi2(n - 1, 0) * admit
                    + sum(1..=n - 2, &|j| pi2(n - 1, j)) * p * (one - p1) * p2 * (one - p3)
                    + sum(n..=cap, &|k| pi2(k, n - 1)) * p * (one - p1) * p2 * p3;
                push("(n,1), n>=3", AgeState::Two(n, 1), pi2(n, 1), rhs);
            }
            let rhs = pi2(1, 0) * admit + sum(2..=cap, &|k| pi2(k, 1)) * p * (one - p1) * p2 * p3;
            push("(2,1)", AgeState::Two(2, 1), pi2(2, 1), rhs);
            for n in 2..=top {
                let rhs = pi2(n - 1, 0) * ((one - p) + p * (one - p1) * (one - p2))
                    + sum(n..=cap, &|k| pi2(k, n - 1)) * ((one - p) * p3 + p * (one - p1) * (one - p2) * p3);
                push("(n,0), n>=2", AgeState::Two(n, 0), pi2(n, 0), rhs);
            }
            push("(1,0)", AgeState::Two(1, 0), pi2(1, 0), total * p * p1);
        }
        RelayPolicy::NoBufferNoPreempt => {
            let stay = (one - p) * (one - p3) + p * (one - p1) * (one - p3);
            for n in 3..=top {
                for m in 2..n {
                    push("n>m>=2", AgeState::Two(n, m), pi2(n, m), pi2(n - 1, m - 1) * stay);
                }
            }
            for n in 2..=top {
                push("(n,1), n>=2", AgeState::Two(n, 1), pi2(n, 1), pi2(n - 1, 0) * p * (one - p1) * p2);
                let rhs = pi2(n - 1, 0) * ((one - p) + p * (one - p1) * (one - p2))
                    + sum(n..=cap, &|k| pi2(k, n - 1)) * ((one - p) * p3 + p * (one - p1) * p3);
                push("(n,0), n>=2", AgeState::Two(n, 0), pi2(n, 0), rhs);
            }
            push("(1,0)", AgeState::Two(1, 0), pi2(1, 0), total * p * p1);
        }
        RelayPolicy::BufferPreempt => {
            let delta = one - p * (p1 + p2 - p1 * p2);
            let eta = p * (one - p1) * p2;
            for n in 3..=top {
                for m in 2..n {
                    for l in 2..m {
                        let rhs = pi3(n - 1, m - 1, l - 1) * delta * (one - p3);
                        push("n>m>l>=2", AgeState::Three(n, m, l), pi3(n, m, l), rhs);
                    }
                    let rhs = sum(0..=m - 2, &|j| pi3(n - 1, m - 1, j)) * eta * (one - p3);
                    push("(n,m,1), n>m>=2", AgeState::Three(n, m, 1), pi3(n, m, 1), rhs);
                    let rhs = pi3(n - 1, m - 1, 0) * delta * (one - p3)
                        + sum(n..=cap, &|k| pi3(k, n - 1, m - 1)) * delta * p3;
                    push("(n,m,0), n>m>=2", AgeState::Three(n, m, 0), pi3(n, m, 0), rhs);
                }
            }
            for n in 2..=top {
                let relay = sum(n..=cap, &|k| sum(0..=n - 2, &|j| pi3(k, n - 1, j)));
                let rhs = pi3(n - 1, 0, 0) * eta + relay * eta * p3;
                push("(n,1,0), n>=2", AgeState::Three(n, 1, 0), pi3(n, 1, 0), rhs);
                let rhs = pi3(n - 1, 0, 0) * delta + sum(n..=cap, &|k| pi3(k, n - 1, 0)) * delta * p3;
                push("(n,0,0), n>=2", AgeState::Three(n, 0, 0), pi3(n, 0, 0), rhs);
            }
            push("(1,0,0)", AgeState::Three(1, 0, 0), pi3(1, 0, 0), total * p * p1);
        }
    }
    out
}
