//! Closed-form stationary AoI laws, joint age-state probabilities and moments.

mod joint;
pub mod mixture;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Denominator, RelayPolicy, ValidatedParams};
use crate::pmf::{AoiPmf, TailMoments};
use crate::scalar::Scalar;

pub use joint::joint_stationary;
use mixture::{Mixture, Term};

/// Default bound on the probability left beyond the stored support.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Inflation applied to the tail bound when choosing the support size.
const SUPPORT_SAFETY: f64 = 10.0;

/// How far an analytic PMF extends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailSpec {
    /// Store exactly `n = 1..=N`.
    NMax(usize),
    /// Store the smallest support whose tail bound is below the tolerance.
    TailTol(f64),
}

impl Default for TailSpec {
    fn default() -> Self {
        TailSpec::TailTol(DEFAULT_TAIL_TOL)
    }
}

/// The closed-form coefficient set of all three relay policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants<T> {
    pub delta: T,
    pub eta: T,
    /// Weight of the `((1-pP1)(1-P3))^(n-1)` component of the preempting no-buffer law.
    pub xi: T,
    pub beta1: T,
    pub beta2: T,
    /// Stationary probability that the buffered relay holds nothing.
    pub s_empty: T,
    pub s_tilde: T,
    pub c1: T,
    pub c2: T,
}

/// Shorthands shared by every closed form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Basics<T> {
    pub q: T,
    pub delta: T,
    pub eta: T,
    pub p3: T,
    /// `(1 - pP1)(1 - P3)`, also written `(delta + eta)(1 - P3)`.
    pub r: T,
    /// `delta (1 - P3)`.
    pub rb: T,
}

impl<T: Scalar> Basics<T> {
    pub fn new(params: &ValidatedParams<T>) -> Self {
        let q = params.direct_success();
        let delta = params.delta();
        let miss = T::one() - params.p3;
        Self { q, delta, eta: params.eta(), p3: params.p3, r: (T::one() - q) * miss, rb: delta * miss }
    }

    /// `(1 - pP1) P3 - p(1 - P1) P2`.
    fn gap(&self) -> T {
        (T::one() - self.q) * self.p3 - self.eta
    }
}

/// Leading weight and `xi` of the preempting no-buffer law.
pub(crate) struct PreemptCoefficients<T> {
    pub lead: T,
    pub xi: T,
    /// `pi(2,1)`.
    pub pi21: T,
    /// Weight of the bracket in the `(n, m)` joint probabilities.
    pub k: T,
}

pub(crate) fn preempt_coefficients<T: Scalar>(params: &ValidatedParams<T>) -> PreemptCoefficients<T> {
    let b = Basics::new(params);
    let one = T::one();
    let (p, p1, p2, p3) = (params.p, params.p1, params.p2, params.p3);
    let gap = b.gap();
    let lead = (one - b.q) * p3 * (one - b.delta) / gap;
    let xi = p * (p1 + (one - p1) * p2 * p3) / (one - p3) - p3 * (one - b.delta) * b.delta / (gap * (one - p3));
    let pi21 = p * p * (one - p1) * p2 * (p1 + (one - p1) * p2 * p3);
    let k = b.eta * p3 * (one - b.delta) * b.delta / gap;
    PreemptCoefficients { lead, xi, pi21, k }
}

/// `(beta1, beta2)` of the non-preempting no-buffer law.
pub(crate) fn no_preempt_coefficients<T: Scalar>(params: &ValidatedParams<T>) -> (T, T) {
    let b = Basics::new(params);
    let one = T::one();
    let beta2 = (one - b.r) * b.eta * b.p3 / (one - b.r + b.eta) * (one - b.q) / (b.r - b.delta);
    (b.q - beta2, beta2)
}

/// `(S, S~, c1, c2)` of the buffered law.
pub(crate) fn buffer_coefficients<T: Scalar>(params: &ValidatedParams<T>) -> (T, T, T, T) {
    let b = Basics::new(params);
    let one = T::one();
    let two = T::lit(2.0);
    let (q, delta, eta, p3) = (b.q, b.delta, b.eta, b.p3);
    let (r, lead) = (b.r, one - b.rb);
    let s = (q * lead * lead + delta * eta * p3 * p3)
        / ((one - delta) * lead * lead - delta * eta * p3 * (one - delta) * (one - p3));
    let de = delta + eta;
    let s_tilde = s * eta + (one - s) * de * p3;
    let c1 = (q * eta * (one - p3) + delta * eta * p3) / ((delta - r) * (one - p3))
        + (delta * p3 * (eta + de * p3) * (one - s) + de * p3 * s_tilde) / (eta * (one - p3));
    let c2 = p3 * (eta * de + p3 * (one - s) * de * (two * delta - eta)) / (eta * (one - p3));
    (s, s_tilde, c1, c2)
}

/// Evaluates every constant; fails if any relay policy's closed form is near-singular.
pub fn derive_constants<T: Scalar>(params: &ValidatedParams<T>) -> Result<DerivedConstants<T>> {
    for policy in RelayPolicy::RELAYED {
        params.ensure_regular(policy)?;
    }
    let xi = preempt_coefficients(params).xi;
    let (beta1, beta2) = no_preempt_coefficients(params);
    let (s_empty, s_tilde, c1, c2) = buffer_coefficients(params);
    Ok(DerivedConstants { delta: params.delta(), eta: params.eta(), xi, beta1, beta2, s_empty, s_tilde, c1, c2 })
}

/// The pair `(eta1, eta2)` from collapsing the preempting joint law onto the AoI.
///
/// Their sum with `p(1-P1)P2` vanishes identically. Undefined when `p(1-P1)P2 = 0`.
pub fn preempt_collapse_coefficients<T: Scalar>(params: &ValidatedParams<T>) -> Result<(T, T)> {
    params.ensure_regular(RelayPolicy::NoBufferPreempt)?;
    let which = Denominator::RelayAdmission;
    if which.is_singular(params.params()) {
        return Err(Error::NearSingular { which, value: params.eta().as_f64() });
    }
    let b = Basics::new(params);
    let one = T::one();
    let c = preempt_coefficients(params);
    let eta1 = b.eta * (one - b.delta) / b.gap();
    let eta2 = (c.pi21 - c.k) / ((one - b.q - b.delta) * (one - b.p3));
    Ok((eta1, eta2))
}

/// Stationary AoI law of `policy` as a signed mixture of geometric terms.
pub fn mixture<T: Scalar>(params: &ValidatedParams<T>, policy: RelayPolicy) -> Result<Mixture<T>> {
    params.ensure_regular(policy)?;
    let b = Basics::new(params);
    let one = T::one();
    let terms = match policy {
        RelayPolicy::NoRelay => vec![Term::geometric(b.q, one - b.q)],
        RelayPolicy::NoBufferPreempt => {
            let c = preempt_coefficients(params);
            vec![Term::geometric(c.lead, b.delta), Term::geometric(c.xi, b.r)]
        }
        RelayPolicy::NoBufferNoPreempt => {
            let (beta1, beta2) = no_preempt_coefficients(params);
            let k = b.eta / (b.delta - b.r);
            vec![
                Term::geometric(beta1 + k * beta1, b.delta),
                Term::geometric(beta2 - k * beta1, b.r),
                Term::shifted_linear(b.eta * beta2, b.r),
            ]
        }
        RelayPolicy::BufferPreempt => {
            let (s, s_tilde, c1, c2) = buffer_coefficients(params);
            let de = b.delta + b.eta;
            let p3 = b.p3;
            vec![
                Term::geometric(de * p3 * (b.q + b.eta) / (b.delta - b.r), b.delta),
                Term::geometric(-c1, b.r),
                Term::geometric(c2, b.rb),
                Term::linear((one - s) * de * p3 * p3 / (one - p3), b.rb),
                Term::linear(p3 * s_tilde / (one - p3), b.r),
            ]
        }
    };
    Ok(Mixture::new(terms))
}

/// Closed-form stationary AoI PMF, truncated per `spec` with the exact tail mass and tail moments.
pub fn aoi_pmf<T: Scalar>(params: &ValidatedParams<T>, policy: RelayPolicy, spec: TailSpec) -> Result<AoiPmf<T>> {
    let mix = mixture(params, policy)?;
    let n_max = match spec {
        TailSpec::NMax(n) => n.max(1),
        TailSpec::TailTol(tol) => mix.support_for(T::lit(tol), T::lit(SUPPORT_SAFETY)),
    };
    let probs: Vec<T> = (1..=n_max).map(|n| mix.value(n)).collect();
    let mut tail = mix.tail_moment(0, n_max);
    if tail < T::zero() && -tail <= mix.tail_bound(n_max, T::one()) + T::epsilon() {
        tail = T::zero();
    }
    let tail_moments = TailMoments { first: mix.tail_moment(1, n_max), second: mix.tail_moment(2, n_max) };
    Ok(AoiPmf::new(probs, tail)?.with_tail_moments(tail_moments))
}

/// Mean AoI from the closed form for each policy.
pub fn aoi_mean_closed_form<T: Scalar>(params: &ValidatedParams<T>, policy: RelayPolicy) -> Result<T> {
    params.ensure_regular(policy)?;
    let b = Basics::new(params);
    let one = T::one();
    let two = T::lit(2.0);
    let (q, delta, eta, p3, r, rb) = (b.q, b.delta, b.eta, b.p3, b.r, b.rb);
    let mean = match policy {
        RelayPolicy::NoRelay => one / q,
        RelayPolicy::NoBufferPreempt => {
            let xi = preempt_coefficients(params).xi;
            (one - q) * p3 / (b.gap() * (one - delta)) + xi / ((one - r) * (one - r))
        }
        RelayPolicy::NoBufferNoPreempt => {
            let (beta1, beta2) = no_preempt_coefficients(params);
            let (ud, ur) = (one - delta, one - r);
            beta1 / (ud * ud)
                + beta2 / (ur * ur)
                + eta * beta1 * (two - delta - r) / (ud * ud * ur * ur)
                + two * eta * beta2 / ur.powi(3)
        }
        RelayPolicy::BufferPreempt => {
            let (s, s_tilde, c1, c2) = buffer_coefficients(params);
            let de = delta + eta;
            let (ud, ur, urb) = (one - delta, one - r, one - rb);
            de * p3 * (q + eta) / ((delta - r) * ud * ud) - c1 / (ur * ur)
                + c2 / (urb * urb)
                + (one - s) * de * p3 * p3 * (one + rb) / ((one - p3) * urb.powi(3))
                + p3 * s_tilde * (one + r) / ((one - p3) * ur.powi(3))
        }
    };
    Ok(mean)
}

/// AoI variance: explicit formulas for the direct-only and non-preempting cases,
/// termwise series summation of the mixture for the other two.
pub fn aoi_variance_closed_form<T: Scalar>(params: &ValidatedParams<T>, policy: RelayPolicy) -> Result<T> {
    let mean = aoi_mean_closed_form(params, policy)?;
    let b = Basics::new(params);
    let one = T::one();
    let second = match policy {
        RelayPolicy::NoRelay => return Ok((one - b.q) / (b.q * b.q)),
        RelayPolicy::NoBufferNoPreempt => {
            let (beta1, beta2) = no_preempt_coefficients(params);
            let (delta, r, eta) = (b.delta, b.r, b.eta);
            let k = eta / (delta - r);
            (beta1 + k * beta1) * (one + delta) / (one - delta).powi(3)
                + (beta2 - k * beta1) * (one + r) / (one - r).powi(3)
                + eta * beta2 * (T::lit(4.0) + T::lit(2.0) * r) / (one - r).powi(4)
        }
        _ => mixture(params, policy)?.tail_moment(2, 0),
    };
    Ok(second - mean * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use crate::pmf::pmf_moments;

    fn reference() -> ValidatedParams<f64> {
        ValidatedParams::new(SystemParams::new(0.4, 0.25, 1.0 / 3.0, 1.0 / 3.0)).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constants_at_reference_setting() {
        let c = derive_constants(&reference()).unwrap();
        assert!(close(c.delta, 0.8, 1e-15));
        assert!(close(c.eta, 0.1, 1e-15));
        assert!(close(c.xi, -0.2, 1e-14));
        assert!(close(c.beta2, -0.12, 1e-14));
        assert!(close(c.beta1, 0.22, 1e-14));
        assert!(close(c.s_empty, 0.766_666_666_666_666_7, 1e-12));
        assert!((0.0..=1.0).contains(&c.s_empty));
        let lead = preempt_coefficients(&reference()).lead;
        assert!(close(lead, 0.3, 1e-14));
    }

    #[test]
    fn reference_setting_pmfs() {
        let v = reference();
        let expect: [(RelayPolicy, &[f64]); 4] = [
            (RelayPolicy::NoRelay, &[0.1, 0.09, 0.081, 0.0729, 0.06561]),
            (RelayPolicy::NoBufferPreempt, &[0.1, 0.12, 0.12, 0.1104, 0.09696]),
            (RelayPolicy::NoBufferNoPreempt, &[0.1, 0.114, 0.114, 0.10632]),
            (RelayPolicy::BufferPreempt, &[0.1, 0.115_333_333_333_333_3, 0.1164, 0.108_909_6]),
        ];
        for (policy, head) in expect {
            let pmf = aoi_pmf(&v, policy, TailSpec::default()).unwrap();
            for (i, &want) in head.iter().enumerate() {
                assert!(close(pmf.prob(i + 1), want, 1e-7), "{policy} n={}", i + 1);
            }
            assert!(pmf.tail_mass() < 1e-12);
        }
    }

    #[test]
    fn closed_form_moments_at_reference_setting() {
        let v = reference();
        let cases = [
            (RelayPolicy::NoRelay, 10.0, 90.0),
            (RelayPolicy::NoBufferPreempt, 6.25, 23.4375),
            (RelayPolicy::NoBufferNoPreempt, 6.4375, 24.621_093_75),
        ];
        for (policy, mean, var) in cases {
            assert!(close(aoi_mean_closed_form(&v, policy).unwrap(), mean, 1e-10), "{policy}");
            assert!(close(aoi_variance_closed_form(&v, policy).unwrap(), var, 1e-8), "{policy}");
        }
        let buffer = aoi_mean_closed_form(&v, RelayPolicy::BufferPreempt).unwrap();
        assert!(6.25 < buffer && buffer < 6.4375);
    }

    #[test]
    fn closed_form_moments_match_pmf_moments() {
        let v = reference();
        for policy in RelayPolicy::ALL {
            let pmf = aoi_pmf(&v, policy, TailSpec::TailTol(1e-14)).unwrap();
            let m = pmf_moments(&pmf, 1e-8).unwrap();
            assert!(close(m.mean, aoi_mean_closed_form(&v, policy).unwrap(), 1e-8), "{policy}");
            assert!(close(m.variance, aoi_variance_closed_form(&v, policy).unwrap(), 1e-8), "{policy}");
        }
    }

    #[test]
    fn fixed_support_keeps_exact_moments() {
        let pmf = aoi_pmf(&reference(), RelayPolicy::NoBufferPreempt, TailSpec::NMax(2)).unwrap();
        assert_eq!(pmf.n_max(), 2);
        assert!(close(pmf.tail_mass(), 0.78, 1e-12));
        assert!(close(pmf.moments().unwrap().mean, 6.25, 1e-10));
    }

    #[test]
    fn collapse_identity_at_reference_setting() {
        let v = reference();
        let (eta1, eta2) = preempt_collapse_coefficients(&v).unwrap();
        assert!(close(eta1 + eta2 + v.eta(), 0.0, 1e-14));
        assert!(close(eta2, preempt_coefficients(&v).xi, 1e-14));
    }

    #[test]
    fn singular_params_are_refused() {
        let v = ValidatedParams::new(SystemParams::new(0.5, 0.5, 0.75, 0.25)).unwrap();
        assert!(matches!(aoi_pmf(&v, RelayPolicy::NoBufferPreempt, TailSpec::default()), Err(Error::NearSingular { .. })));
        assert!(aoi_pmf(&v, RelayPolicy::NoRelay, TailSpec::default()).is_ok());
        assert!(derive_constants(&v).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let v = ValidatedParams::new(SystemParams::<f32>::new(0.4, 0.25, 1.0 / 3.0, 1.0 / 3.0)).unwrap();
        let mean = aoi_mean_closed_form(&v, RelayPolicy::NoBufferPreempt).unwrap();
        assert!((mean - 6.25).abs() < 1e-4);
    }
}
