use crate::error::Result;
use crate::markov::AgeState;
use crate::params::{RelayPolicy, ValidatedParams};
use crate::scalar::Scalar;

use super::{buffer_coefficients, no_preempt_coefficients, preempt_coefficients, Basics};

fn pw<T: Scalar>(base: T, exp: u32) -> T {
    base.powi(exp as i32)
}

/// Closed-form stationary probability of an age-state.
///
/// States whose dimension does not match `policy` or that break the ordering
/// `n > m > l` (zeros trailing) are rejected with `BadState`.
pub fn joint_stationary<T: Scalar>(params: &ValidatedParams<T>, policy: RelayPolicy, state: AgeState) -> Result<T> {
    state.check(policy)?;
    params.ensure_regular(policy)?;
    let b = Basics::new(params);
    let one = T::one();
    let (n, m, l) = state.components();
    let value = match policy {
        RelayPolicy::NoRelay => b.q * pw(one - b.q, n - 1),
        RelayPolicy::NoBufferPreempt => {
            if m == 0 {
                (one - b.delta) * pw(b.delta, n - 1) - b.eta * pw(b.rb, n - 1)
            } else {
                let c = preempt_coefficients(params);
                let moving = pw(b.r, n - 2) * pw(b.delta / (one - b.q), m - 1);
                c.pi21 * moving + c.k * (pw(b.delta, n - 2) * pw(one - b.p3, m - 1) - moving)
            }
        }
        RelayPolicy::NoBufferNoPreempt => {
            let (beta1, beta2) = no_preempt_coefficients(params);
            if m == 0 {
                beta1 * pw(b.delta, n - 1) + beta2 * pw(b.r, n - 1)
            } else {
                b.eta * (beta1 * pw(b.delta, n - m - 1) * pw(b.r, m - 1) + beta2 * pw(b.r, n - 2))
            }
        }
        RelayPolicy::BufferPreempt => buffer_joint(params, &b, n, m, l),
    };
    Ok(value)
}

fn buffer_joint<T: Scalar>(params: &ValidatedParams<T>, b: &Basics<T>, n: u32, m: u32, l: u32) -> T {
    let (s, s_tilde, _, _) = buffer_coefficients(params);
    let one = T::one();
    let (q, delta, eta, p3, r, rb) = (b.q, b.delta, b.eta, b.p3, b.r, b.rb);
    let de = delta + eta;
    let empty = one - s;
    let count = |k: u32| T::from_count(k as u64);
    if m == 0 {
        return (q + eta) * pw(delta, n - 1) - (eta - empty * eta * p3) * pw(rb, n - 1)
            - empty * eta * p3 * count(n) * pw(rb, n - 1);
    }
    if l == 0 {
        return eta * (q + eta) * pw(delta, n - 2) * pw(one - p3, m - 1)
            - eta * eta * pw(rb, n - 2)
            - empty * eta * eta * p3 * count(n - m - 1) * pw(rb, n - 2)
            + s_tilde * eta * p3 * pw(r, n - 2) * count(m) * pw(delta / de, m - 1)
            - empty * delta * eta * p3 * p3 * count(m) * pw(rb, n - 2);
    }
    // Powers of `delta` are regrouped so nothing is divided by it:
    // delta^(n-3) (r/delta)^(m-2) = delta^(n-m-1) r^(m-2), and likewise for rb.
    let fresh = pw(delta / de, l - 1);
    let d_gap = pw(delta, n - m - 1);
    let miss = one - p3;
    let inner = (q + eta) * d_gap * pw(r, m - 2) * fresh
        - eta * d_gap * pw(miss, n - 3) * pw(de, m - 2) * fresh
        - empty * eta * p3 * count(n - m - 1) * d_gap * pw(miss, n - 3) * pw(de, m - 2) * fresh;
    eta * eta * miss * inner + eta * p3 * s_tilde * pw(r, n - 2) * fresh
        - eta * p3 * s_tilde * pw(r, n - 2) * pw(delta / de, m - 1)
        - delta * eta * p3 * p3 * empty * d_gap * pw(miss, n - 2) * pw(de, m - 1) * fresh
        + delta * eta * p3 * p3 * empty * pw(rb, n - 2)
}
