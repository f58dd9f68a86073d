use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pmf::AoiPmf;
use crate::scalar::Scalar;

use super::{AgeState, TruncatedChain};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target for both the L1 residual `||pi K - pi||` and the extrapolated distance to the fixed point.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_SOLVE_TOL, max_iterations: 200_000 }
    }
}

/// Solved stationary vector of a truncated chain.
#[derive(Debug, Clone)]
pub struct StationaryDistribution<'a, T> {
    chain: &'a TruncatedChain<T>,
    pi: Vec<T>,
    /// L1 residual of the last iterate; the returned vector is one further step and no worse.
    pub residual: f64,
    pub iterations: usize,
    /// Observed per-sweep contraction of the residual.
    pub contraction: f64,
}

impl<'a, T: Scalar> StationaryDistribution<'a, T> {
    pub fn chain(&self) -> &'a TruncatedChain<T> {
        self.chain
    }

    /// Probabilities indexed like [`TruncatedChain::states`], overflow last.
    pub fn vector(&self) -> &[T] {
        &self.pi
    }

    /// Stationary probability of `state`; zero outside the window.
    pub fn prob(&self, state: AgeState) -> T {
        self.chain.index_of(state).map_or_else(T::zero, |i| self.pi[i])
    }

    /// Mass parked in the overflow state, a bound on the truncation bias.
    pub fn overflow_mass(&self) -> T {
        self.pi[self.chain.overflow_index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgeState, T)> + '_ {
        self.chain.states().iter().copied().zip(self.pi.iter().copied())
    }

    /// Recomputes `||pi K - pi||_1` for the stored vector.
    pub fn recompute_residual(&self) -> f64 {
        let mut next = vec![T::zero(); self.pi.len()];
        for (i, &w) in self.pi.iter().enumerate() {
            for (c, v) in self.chain.row(i) {
                next[c] = next[c] + w * v;
            }
        }
        next.iter().zip(&self.pi).map(|(a, b)| (*a - *b).abs().as_f64()).sum()
    }
}

/// Incoming-transition lists (the transposed kernel) for pull-style products.
struct Incoming<T> {
    ptr: Vec<usize>,
    from: Vec<u32>,
    prob: Vec<T>,
}

fn transpose<T: Scalar>(chain: &TruncatedChain<T>) -> Incoming<T> {
    let (row_ptr, cols, vals) = chain.csr();
    let size = chain.size();
    let mut ptr = vec![0usize; size + 1];
    for &c in cols {
        ptr[c as usize + 1] += 1;
    }
    for i in 0..size {
        ptr[i + 1] += ptr[i];
    }
    let mut fill = ptr.clone();
    let mut from = vec![0u32; cols.len()];
    let mut prob = vec![T::zero(); cols.len()];
    for i in 0..size {
        for k in row_ptr[i]..row_ptr[i + 1] {
            let c = cols[k] as usize;
            from[fill[c]] = i as u32;
            prob[fill[c]] = vals[k];
            fill[c] += 1;
        }
    }
    Incoming { ptr, from, prob }
}

pub fn stationary<T: Scalar>(chain: &TruncatedChain<T>, tol: f64) -> Result<StationaryDistribution<'_, T>> {
    stationary_with(chain, SolveOptions { tol, ..SolveOptions::default() })
}

/// Power iteration from a geometric profile in the AoI.
///
/// Every row returns to the reset state with probability `pP1`, so each sweep
/// contracts the error by at least `1 - pP1`. Iteration stops once the residual
/// and its extrapolated remainder `res * rho / (1 - rho)` are both below `tol`.
pub fn stationary_with<T: Scalar>(chain: &TruncatedChain<T>, opts: SolveOptions) -> Result<StationaryDistribution<'_, T>> {
    let incoming = transpose(chain);
    let ratio = chain.params().dominant_ratio(chain.policy()).as_f64().clamp(0.0, 0.999_999);
    let mut pi: Vec<T> = chain
        .states()
        .iter()
        .map(|s| T::lit(ratio.powi(s.aoi() as i32 - 1).max(1e-300)))
        .collect();
    pi.push(T::lit(ratio.powi(chain.cap() as i32).max(1e-300)));
    normalize(&mut pi);
    let mut next = vec![T::zero(); pi.len()];
    let (mut previous, mut residual, mut contraction) = (f64::INFINITY, f64::INFINITY, 1.0);
    for iteration in 1..=opts.max_iterations {
        next.par_iter_mut().enumerate().for_each(|(j, out)| {
            let range = incoming.ptr[j]..incoming.ptr[j + 1];
            *out = incoming.from[range.clone()]
                .iter()
                .zip(&incoming.prob[range])
                .fold(T::zero(), |acc, (&i, &v)| acc + pi[i as usize] * v);
        });
        normalize(&mut next);
        residual = next.par_iter().zip(pi.par_iter()).map(|(a, b)| (*a - *b).abs().as_f64()).sum();
        std::mem::swap(&mut pi, &mut next);
        if previous.is_finite() && previous > 0.0 {
            contraction = residual / previous;
        }
        previous = residual;
        let remainder = if contraction < 1.0 { residual * contraction / (1.0 - contraction) } else { f64::INFINITY };
        if residual < opts.tol && (remainder < opts.tol || residual == 0.0) {
            return Ok(StationaryDistribution { chain, pi, residual, iterations: iteration, contraction });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual, tol: opts.tol })
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let total = v.iter().fold(T::zero(), |acc, &x| acc + x);
    for x in v.iter_mut() {
        *x = *x / total;
    }
}

/// AoI law of the solved chain: mass summed over states sharing the first
/// component, with the overflow mass as tail.
pub fn aoi_marginal<T: Scalar>(dist: &StationaryDistribution<'_, T>) -> Result<AoiPmf<T>> {
    let mut probs = vec![T::zero(); dist.chain.cap() as usize];
    for (state, w) in dist.iter() {
        let slot = &mut probs[state.aoi() as usize - 1];
        *slot = *slot + w;
    }
    AoiPmf::new(probs, dist.overflow_mass())
}
