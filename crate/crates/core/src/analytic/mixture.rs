//! Finite mixtures of geometric terms and their exact series sums.

use crate::scalar::Scalar;

/// One term `coef * k^degree * ratio^(k-1)` with `k = n - offset`, zero for `n <= offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term<T> {
    pub coef: T,
    pub ratio: T,
    pub degree: u8,
    pub offset: u8,
}

impl<T: Scalar> Term<T> {
    /// `coef * ratio^(n-1)`.
    pub fn geometric(coef: T, ratio: T) -> Self {
        Self { coef, ratio, degree: 0, offset: 0 }
    }

    /// `coef * n * ratio^(n-1)`.
    pub fn linear(coef: T, ratio: T) -> Self {
        Self { coef, ratio, degree: 1, offset: 0 }
    }

    /// `coef * (n-1) * ratio^(n-2)`, vanishing at `n = 1`.
    pub fn shifted_linear(coef: T, ratio: T) -> Self {
        Self { coef, ratio, degree: 1, offset: 1 }
    }

    pub fn value(&self, n: usize) -> T {
        let off = self.offset as usize;
        if n <= off {
            return T::zero();
        }
        let k = n - off;
        let power = self.ratio.powi((k - 1) as i32);
        let weight = if self.degree == 0 { T::one() } else { T::from_count(k as u64).powi(self.degree as i32) };
        self.coef * weight * power
    }

    /// `sum_{n > n_max} n^moment * value(n)`.
    pub fn tail_moment(&self, moment: u8, n_max: usize) -> T {
        let off = self.offset as usize;
        let from = n_max.saturating_sub(off);
        let shift = T::from_count(off as u64);
        // (k + off)^moment expanded binomially.
        let mut sum = T::zero();
        for c in 0..=moment {
            let binom = T::from_count(binomial(moment as u64, c as u64));
            sum = sum + binom * shift.powi((moment - c) as i32) * power_sum_tail(self.ratio, c + self.degree, from);
        }
        self.coef * sum
    }

    /// Same as [`Term::tail_moment`] but with `|coef|`, used to bound truncation error.
    fn abs_tail_mass(&self, n_max: usize) -> T {
        Term { coef: self.coef.abs(), ..*self }.tail_moment(0, n_max)
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Eulerian polynomial `A_d(r)`, with `sum_{k>=1} k^d r^(k-1) = A_d(r) / (1-r)^(d+1)`.
fn eulerian<T: Scalar>(degree: u8, r: T) -> T {
    let c = T::lit;
    match degree {
        0 | 1 => T::one(),
        2 => T::one() + r,
        3 => T::one() + c(4.0) * r + r * r,
        4 => T::one() + c(11.0) * r + c(11.0) * r * r + r * r * r,
        _ => unreachable!("moments above the fourth power are never needed"),
    }
}

/// `sum_{k > from} k^degree r^(k-1)` for `0 <= r < 1`.
pub fn power_sum_tail<T: Scalar>(r: T, degree: u8, from: usize) -> T {
    let full = |d: u8| eulerian(d, r) / (T::one() - r).powi(d as i32 + 1);
    if from == 0 {
        return full(degree);
    }
    // Substitute k = from + i and expand (from + i)^degree.
    let base = T::from_count(from as u64);
    let mut sum = T::zero();
    for c in 0..=degree {
        let binom = T::from_count(binomial(degree as u64, c as u64));
        sum = sum + binom * base.powi((degree - c) as i32) * full(c);
    }
    sum * r.powi(from as i32)
}

/// Signed mixture of [`Term`]s describing a closed-form PMF.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<T> {
    pub terms: Vec<Term<T>>,
}

impl<T: Scalar> Mixture<T> {
    pub fn new(terms: Vec<Term<T>>) -> Self {
        Self { terms }
    }

    pub fn value(&self, n: usize) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| acc + t.value(n))
    }

    /// `sum_{n > n_max} n^moment * value(n)`.
    pub fn tail_moment(&self, moment: u8, n_max: usize) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| acc + t.tail_moment(moment, n_max))
    }

    /// Total mass, first and second raw moments over all `n >= 1`.
    pub fn raw_moments(&self) -> (T, T, T) {
        (self.tail_moment(0, 0), self.tail_moment(1, 0), self.tail_moment(2, 0))
    }

    /// Upper bound on the absolute tail beyond `n_max`, inflated by `safety`.
    pub fn tail_bound(&self, n_max: usize, safety: T) -> T {
        safety * self.terms.iter().fold(T::zero(), |acc, t| acc + t.abs_tail_mass(n_max))
    }

    /// Smallest support size whose tail bound falls below `tol`.
    pub fn support_for(&self, tol: T, safety: T) -> usize {
        let ok = |n: usize| self.tail_bound(n, safety) < tol;
        if ok(1) {
            return 1;
        }
        let mut hi = 2;
        while !ok(hi) {
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}
