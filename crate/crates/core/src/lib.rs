//! Stationary age of information (AoI) for a slotted status-update link helped by a relay.
//!
//! A source sends to a destination over an erasure link and, in the same slot, to a
//! relay that forwards over a second hop. Three relay policies are covered (no buffer
//! with or without preemption, and a one-packet buffer) plus the direct-only baseline.
//!
//! * [`analytic`] evaluates the closed-form laws, joint age-state probabilities and moments.
//! * [`markov`] builds the truncated age-state chain and solves it numerically.
//! * [`sim`] runs the slot-level system and audits its transition frequencies.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod analytic;
pub mod error;
pub mod markov;
pub mod params;
pub mod pmf;
pub mod scalar;
pub mod sim;

pub use analytic::{
    aoi_mean_closed_form, aoi_pmf, aoi_variance_closed_form, derive_constants, joint_stationary, TailSpec,
};
pub use error::{Error, Result};
pub use markov::{aoi_marginal, build_chain, stationary, transition_row, AgeState};
pub use params::{validate, Denominator, RelayPolicy, SINGULARITY_EPS};
pub use pmf::{pmf_mean, pmf_moments, pmf_variance, total_variation};
pub use scalar::Scalar;

pub type SystemParams = params::SystemParams<f64>;
pub type ValidatedParams = params::ValidatedParams<f64>;
pub type AoiPmf = pmf::AoiPmf<f64>;
pub type Moments = pmf::Moments<f64>;
pub type DerivedConstants = analytic::DerivedConstants<f64>;
pub type TruncatedChain = markov::TruncatedChain<f64>;
