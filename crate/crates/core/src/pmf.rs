//! Truncated AoI probability mass functions and their moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tail mass above which a PMF without exact tail moments is rejected for moment work.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Entries this far below zero are treated as rounding noise and clipped.
pub const NEGATIVE_CLIP: f64 = 1e-15;

/// Exact contributions of the truncated tail, `sum_{n>N} n p(n)` and `sum_{n>N} n^2 p(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMoments<T> {
    pub first: T,
    pub second: T,
}

/// Stationary AoI law restricted to `n = 1..=N`, with the remaining mass kept explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiPmf<T> {
    probs: Vec<T>,
    tail_mass: T,
    tail_moments: Option<TailMoments<T>>,
}

impl<T: Scalar> AoiPmf<T> {
    /// Builds a PMF whose `probs[i]` is the probability of age `i + 1`.
    ///
    /// Entries within [`NEGATIVE_CLIP`] of zero are clipped; anything more negative,
    /// or a total mass away from one, is an error.
    pub fn new(mut probs: Vec<T>, tail_mass: T) -> Result<Self> {
        let clip = -T::lit(NEGATIVE_CLIP);
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < clip {
                return Err(Error::InvalidPmf(format!("Pr{{age={}}} = {}", i + 1, p)));
            }
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let tail_mass = if tail_mass < T::zero() && tail_mass >= clip { T::zero() } else { tail_mass };
        if !tail_mass.is_finite() || tail_mass < T::zero() {
            return Err(Error::InvalidPmf(format!("tail mass {tail_mass}")));
        }
        let total = probs.iter().fold(T::zero(), |acc, &p| acc + p) + tail_mass;
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidPmf(format!("total mass {total} differs from 1")));
        }
        Ok(Self { probs, tail_mass, tail_moments: None })
    }

    /// Attaches exact tail moment contributions (used by closed-form PMFs).
    pub fn with_tail_moments(mut self, tail: TailMoments<T>) -> Self {
        self.tail_moments = Some(tail);
        self
    }

    /// Point mass at age `n`.
    pub fn point(n: usize) -> Self {
        assert!(n >= 1, "ages start at 1");
        let mut probs = vec![T::zero(); n];
        probs[n - 1] = T::one();
        Self { probs, tail_mass: T::zero(), tail_moments: None }
    }

    /// Largest age carried explicitly.
    pub fn n_max(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn tail_mass(&self) -> T {
        self.tail_mass
    }

    pub fn tail_moments(&self) -> Option<TailMoments<T>> {
        self.tail_moments
    }

    /// `Pr{age = n}`, zero outside the stored support.
    pub fn prob(&self, n: usize) -> T {
        if n == 0 {
            return T::zero();
        }
        self.probs.get(n - 1).copied().unwrap_or_else(T::zero)
    }

    /// `(age, probability)` rows in ascending age order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (i + 1, p))
    }

    /// Mean and variance; see [`pmf_moments`].
    pub fn moments(&self) -> Result<Moments<T>> {
        pmf_moments(self, T::lit(DEFAULT_TAIL_TOL))
    }
}

/// First two moments of an AoI law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    pub mean: T,
    pub variance: T,
    pub second_moment: T,
}

impl<T: Scalar> Moments<T> {
    pub fn from_raw(mean: T, second_moment: T) -> Self {
        let variance = (second_moment - mean * mean).max(T::zero());
        Self { mean, variance, second_moment }
    }
}

/// Mean and variance with tail correction.
///
/// PMFs carrying exact [`TailMoments`] use them. Otherwise the tail mass is placed
/// at `N + 1`, the smallest age it can occupy, and the PMF is rejected with
/// [`Error::TailTooHeavy`] when that mass exceeds `tail_tol`.
pub fn pmf_moments<T: Scalar>(pmf: &AoiPmf<T>, tail_tol: T) -> Result<Moments<T>> {
    let (mut first, mut second) = (T::zero(), T::zero());
    for (n, p) in pmf.rows() {
        let n = T::from_count(n as u64);
        first = first + n * p;
        second = second + n * n * p;
    }
    match pmf.tail_moments {
        Some(tail) => {
            first = first + tail.first;
            second = second + tail.second;
        }
        None => {
            if pmf.tail_mass > tail_tol {
                return Err(Error::TailTooHeavy {
                    tail_mass: pmf.tail_mass.as_f64(),
                    limit: tail_tol.as_f64(),
                });
            }
            let edge = T::from_count(pmf.n_max() as u64 + 1);
            first = first + pmf.tail_mass * edge;
            second = second + pmf.tail_mass * edge * edge;
        }
    }
    Ok(Moments::from_raw(first, second))
}

pub fn pmf_mean<T: Scalar>(pmf: &AoiPmf<T>) -> Result<T> {
    pmf.moments().map(|m| m.mean)
}

pub fn pmf_variance<T: Scalar>(pmf: &AoiPmf<T>) -> Result<T> {
    pmf.moments().map(|m| m.variance)
}

/// Total variation distance, `1/2 sum |a(n) - b(n)| + 1/2 |tail_a - tail_b|`.
pub fn total_variation<T: Scalar>(a: &AoiPmf<T>, b: &AoiPmf<T>) -> T {
    let len = a.n_max().max(b.n_max());
    let body = (1..=len).fold(T::zero(), |acc, n| acc + (a.prob(n) - b.prob(n)).abs());
    let half = T::lit(0.5);
    half * body + half * (a.tail_mass - b.tail_mass).abs()
}
