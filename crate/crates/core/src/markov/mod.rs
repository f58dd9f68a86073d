//! Truncated Markov-chain oracle built from the age-state transition tables.

mod balance;
mod solve;
mod state;

use crate::error::{Error, Result};
use crate::params::{RelayPolicy, SystemParams};
use crate::scalar::Scalar;

pub use balance::{balance_residuals, BalanceResidual};
pub use solve::{aoi_marginal, stationary, stationary_with, SolveOptions, StationaryDistribution, DEFAULT_SOLVE_TOL};
pub use state::AgeState;

pub const MIN_CAP: u32 = 3;
pub const DEFAULT_CAP_FLOOR: u32 = 50;
/// Largest AoI component the oracle will enumerate.
pub const MAX_CAP: u32 = 20_000;
/// Largest chain the oracle will build.
pub const DEFAULT_STATE_LIMIT: u64 = 8_000_000;

/// Shape of an age-state, which selects the row of the transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateClass {
    /// `(n)` of the direct-only chain.
    Direct,
    /// `(n,0)` or `(n,0,0)`.
    RelayEmpty,
    /// `(n,m)` or `(n,m,0)` with `m >= 1`.
    RelayBusy,
    /// `(n,m,l)` with `l >= 1`.
    RelayAndBuffer,
}

impl StateClass {
    pub fn of(state: AgeState) -> Self {
        match state.components() {
            _ if state.dimension() == 1 => StateClass::Direct,
            (_, 0, _) => StateClass::RelayEmpty,
            (_, _, 0) => StateClass::RelayBusy,
            _ => StateClass::RelayAndBuffer,
        }
    }

    /// Classes present in the chain of `policy`.
    pub fn for_policy(policy: RelayPolicy) -> &'static [StateClass] {
        match policy {
            RelayPolicy::NoRelay => &[StateClass::Direct],
            RelayPolicy::BufferPreempt => &[StateClass::RelayEmpty, StateClass::RelayBusy, StateClass::RelayAndBuffer],
            _ => &[StateClass::RelayEmpty, StateClass::RelayBusy],
        }
    }

    /// Smallest state of this class under `policy`.
    pub fn representative(self, policy: RelayPolicy) -> AgeState {
        match self {
            StateClass::Direct | StateClass::RelayEmpty => AgeState::reset(policy),
            StateClass::RelayBusy => AgeState::from_components(policy, 2, 1, 0),
            StateClass::RelayAndBuffer => AgeState::Three(3, 2, 1),
        }
    }

    pub fn pattern(self, policy: RelayPolicy) -> &'static str {
        match (self, policy.state_dimension()) {
            (StateClass::Direct, _) => "(n)",
            (StateClass::RelayEmpty, 2) => "(n,0)",
            (StateClass::RelayEmpty, _) => "(n,0,0)",
            (StateClass::RelayBusy, 2) => "(n,m)",
            (StateClass::RelayBusy, _) => "(n,m,0)",
            (StateClass::RelayAndBuffer, _) => "(n,m,l)",
        }
    }
}

/// One cell of a transition table: successor pattern, concrete successor, probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry<T> {
    pub label: &'static str,
    pub next: AgeState,
    pub prob: T,
}

/// Full table row of `state`, zero-probability cells included, in table order.
pub fn table_row<T: Scalar>(state: AgeState, params: &SystemParams<T>, policy: RelayPolicy) -> Result<Vec<TableEntry<T>>> {
    state.check(policy)?;
    let one = T::one();
    let SystemParams { p, p1, p2, p3 } = *params;
    let direct = p * p1;
    let at = |n: u32, m: u32, l: u32| AgeState::from_components(policy, n, m, l);
    let cell = |label, next, prob| TableEntry { label, next, prob };
    let (n, m, l) = state.components();
    let entries = match (policy, StateClass::of(state)) {
        (RelayPolicy::NoRelay, _) => vec![cell("(n+1)", at(n + 1, 0, 0), one - direct), cell("(1)", at(1, 0, 0), direct)],
        (RelayPolicy::BufferPreempt, StateClass::RelayEmpty) => vec![
            cell("(n+1,0,0)", at(n + 1, 0, 0), (one - p) + p * (one - p1) * (one - p2)),
            cell("(n+1,1,0)", at(n + 1, 1, 0), p * (one - p1) * p2),
            cell("(1,0,0)", at(1, 0, 0), direct),
        ],
        (_, StateClass::RelayEmpty) => vec![
            cell("(n+1,0)", at(n + 1, 0, 0), (one - p) + p * (one - p1) * (one - p2)),
            cell("(n+1,1)", at(n + 1, 1, 0), p * (one - p1) * p2),
            cell("(1,0)", at(1, 0, 0), direct),
        ],
        (RelayPolicy::NoBufferPreempt, _) => vec![
            cell("(n+1,m+1)", at(n + 1, m + 1, 0), (one - p) * (one - p3) + p * (one - p1) * (one - p2) * (one - p3)),
            cell("(m+1,0)", at(m + 1, 0, 0), (one - p) * p3 + p * (one - p1) * (one - p2) * p3),
            cell("(n+1,1)", at(n + 1, 1, 0), p * (one - p1) * p2 * (one - p3)),
            cell("(m+1,1)", at(m + 1, 1, 0), p * (one - p1) * p2 * p3),
            cell("(1,0)", at(1, 0, 0), direct),
        ],
        (RelayPolicy::NoBufferNoPreempt, _) => vec![
            cell("(n+1,m+1)", at(n + 1, m + 1, 0), (one - p) * (one - p3) + p * (one - p1) * (one - p3)),
            cell("(m+1,0)", at(m + 1, 0, 0), (one - p) * p3 + p * (one - p1) * p3),
            cell("(1,0)", at(1, 0, 0), direct),
        ],
        (RelayPolicy::BufferPreempt, StateClass::RelayBusy) => vec![
            cell("(n+1,m+1,0)", at(n + 1, m + 1, 0), (one - p) * (one - p3) + p * (one - p1) * (one - p2) * (one - p3)),
            cell("(m+1,0,0)", at(m + 1, 0, 0), (one - p) * p3 + p * (one - p1) * (one - p2) * p3),
            cell("(n+1,m+1,1)", at(n + 1, m + 1, 1), p * (one - p1) * p2 * (one - p3)),
            cell("(m+1,1,0)", at(m + 1, 1, 0), p * (one - p1) * p2 * p3),
            cell("(1,0,0)", at(1, 0, 0), direct),
        ],
        (RelayPolicy::BufferPreempt, _) => vec![
            cell("(n+1,m+1,l+1)", at(n + 1, m + 1, l + 1), (one - p) * (one - p3) + p * (one - p1) * (one - p2) * (one - p3)),
            cell("(m+1,l+1,0)", at(m + 1, l + 1, 0), (one - p) * p3 + p * (one - p1) * (one - p2) * p3),
            cell("(n+1,m+1,1)", at(n + 1, m + 1, 1), p * (one - p1) * p2 * (one - p3)),
            cell("(m+1,1,0)", at(m + 1, 1, 0), p * (one - p1) * p2 * p3),
            cell("(1,0,0)", at(1, 0, 0), direct),
        ],
    };
    Ok(entries)
}

/// Successors of `state` with their one-slot probabilities, as listed in the transition tables.
///
/// Zero-probability successors are omitted. Accepts any probabilities in `[0, 1]`,
/// including `p = 0`.
pub fn transition_row<T: Scalar>(
    state: AgeState,
    params: &SystemParams<T>,
    policy: RelayPolicy,
) -> Result<Vec<(AgeState, T)>> {
    Ok(table_row(state, params, policy)?
        .into_iter()
        .filter(|e| e.prob > T::zero())
        .map(|e| (e.next, e.prob))
        .collect())
}

/// Number of age-states with first component at most `cap`.
pub fn state_count(policy: RelayPolicy, cap: u32) -> u64 {
    let c = cap as u64;
    match policy {
        RelayPolicy::NoRelay => c,
        RelayPolicy::NoBufferPreempt | RelayPolicy::NoBufferNoPreempt => c * (c + 1) / 2,
        // (n,0,0) and (n,m,0) give c(c+1)/2; (n,m,l) with n>m>l>=1 give C(c,3).
        RelayPolicy::BufferPreempt => c * (c + 1) / 2 + c * c.saturating_sub(1) * c.saturating_sub(2) / 6,
    }
}

/// Position of a well-formed state in the enumeration order of [`enumerate`].
fn position(state: AgeState) -> usize {
    let (n, m, l) = state.components();
    let (n, m, l) = (n as u64, m as u64, l as u64);
    let index = match state {
        AgeState::One(_) => n - 1,
        AgeState::Two(..) => (n - 1) * n / 2 + m,
        AgeState::Three(..) => {
            let before = state_count(RelayPolicy::BufferPreempt, (n - 1) as u32);
            if m == 0 {
                before
            } else {
                before + 1 + m * (m - 1) / 2 + l
            }
        }
    };
    index as usize
}

fn enumerate(policy: RelayPolicy, cap: u32) -> Vec<AgeState> {
    let mut states = Vec::with_capacity(state_count(policy, cap) as usize);
    for n in 1..=cap {
        match policy {
            RelayPolicy::NoRelay => states.push(AgeState::One(n)),
            RelayPolicy::NoBufferPreempt | RelayPolicy::NoBufferNoPreempt => {
                states.extend((0..n).map(|m| AgeState::Two(n, m)));
            }
            RelayPolicy::BufferPreempt => {
                states.push(AgeState::Three(n, 0, 0));
                for m in 1..n {
                    states.extend((0..m).map(|l| AgeState::Three(n, m, l)));
                }
            }
        }
    }
    states
}

/// Finite chain on all age-states with AoI at most `cap`, plus one overflow state.
///
/// Transitions leaving the window land in the overflow state, which returns to
/// the reset state with probability `pP1` and stays put otherwise.
#[derive(Debug, Clone)]
pub struct TruncatedChain<T> {
    params: SystemParams<T>,
    policy: RelayPolicy,
    cap: u32,
    states: Vec<AgeState>,
    /// Forward rows in CSR form; column `states.len()` is the overflow state.
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Scalar> TruncatedChain<T> {
    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    pub fn policy(&self) -> RelayPolicy {
        self.policy
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Enumerated age-states, in ascending lexicographic order.
    pub fn states(&self) -> &[AgeState] {
        &self.states
    }

    /// Number of rows including the overflow state.
    pub fn size(&self) -> usize {
        self.states.len() + 1
    }

    pub fn overflow_index(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: AgeState) -> Option<usize> {
        if state.dimension() != self.policy.state_dimension() || !state.is_well_formed() || state.aoi() > self.cap {
            return None;
        }
        Some(position(state))
    }

    /// Row `i` as `(column, probability)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().map(|&c| c as usize).zip(self.vals[range].iter().copied())
    }

    /// Row of `state` with successors named; overflow targets are reported as `None`.
    pub fn kernel_row(&self, state: AgeState) -> Option<Vec<(Option<AgeState>, T)>> {
        let i = self.index_of(state)?;
        Some(self.row(i).map(|(c, v)| (self.states.get(c).copied(), v)).collect())
    }

    pub(crate) fn csr(&self) -> (&[usize], &[u32], &[T]) {
        (&self.row_ptr, &self.cols, &self.vals)
    }
}

/// Smallest cap with `ratio^cap * cap` below `bias`, clamped to `[DEFAULT_CAP_FLOOR, MAX_CAP]`.
///
/// Returns `CapTooLarge` when the bound cannot be met under the ceiling.
pub fn cap_for_bias<T: Scalar>(params: &SystemParams<T>, policy: RelayPolicy, bias: f64) -> Result<u32> {
    let ratio = params.dominant_ratio(policy).as_f64();
    if ratio <= 0.0 {
        return Ok(DEFAULT_CAP_FLOOR);
    }
    if ratio >= 1.0 {
        return Err(Error::CapTooLarge { cap: u32::MAX, max: MAX_CAP });
    }
    let mut cap = (bias.ln() / ratio.ln()).ceil().max(1.0);
    while ratio.powf(cap) * cap >= bias {
        cap += 1.0;
        if cap > MAX_CAP as f64 {
            return Err(Error::CapTooLarge { cap: cap as u32, max: MAX_CAP });
        }
    }
    Ok((cap as u32).max(DEFAULT_CAP_FLOOR))
}

/// Default cap: truncated tail below `1e-12`.
pub fn default_cap<T: Scalar>(params: &SystemParams<T>, policy: RelayPolicy) -> Result<u32> {
    cap_for_bias(params, policy, 1e-12)
}

/// Builds the truncated chain with the default state budget.
pub fn build_chain<T: Scalar>(params: &SystemParams<T>, policy: RelayPolicy, cap: u32) -> Result<TruncatedChain<T>> {
    build_chain_with_limit(params, policy, cap, DEFAULT_STATE_LIMIT)
}

pub fn build_chain_with_limit<T: Scalar>(
    params: &SystemParams<T>,
    policy: RelayPolicy,
    cap: u32,
    state_limit: u64,
) -> Result<TruncatedChain<T>> {
    if cap < MIN_CAP {
        return Err(Error::CapTooSmall { cap, min: MIN_CAP });
    }
    if cap > MAX_CAP {
        return Err(Error::CapTooLarge { cap, max: MAX_CAP });
    }
    let count = state_count(policy, cap);
    if count > state_limit {
        return Err(Error::StateBudget { cap, states: count, limit: state_limit });
    }
    let states = enumerate(policy, cap);
    let overflow = states.len() as u32;
    let mut row_ptr = Vec::with_capacity(states.len() + 2);
    let mut cols = Vec::with_capacity(states.len() * 5);
    let mut vals = Vec::with_capacity(states.len() * 5);
    row_ptr.push(0);
    let mut merged: Vec<(u32, T)> = Vec::with_capacity(5);
    for &s in &states {
        merged.clear();
        for (succ, prob) in transition_row(s, params, policy)? {
            let col = if succ.aoi() <= cap { position(succ) as u32 } else { overflow };
            match merged.iter_mut().find(|(c, _)| *c == col) {
                Some(entry) => entry.1 = entry.1 + prob,
                None => merged.push((col, prob)),
            }
        }
        push_normalized(&mut merged, &mut cols, &mut vals);
        row_ptr.push(cols.len());
    }
    // Overflow state: reset with pP1, otherwise stay.
    let direct = params.direct_success();
    merged.clear();
    merged.push((0, direct));
    if direct < T::one() {
        merged.push((overflow, T::one() - direct));
    }
    push_normalized(&mut merged, &mut cols, &mut vals);
    row_ptr.push(cols.len());
    Ok(TruncatedChain { params: *params, policy, cap, states, row_ptr, cols, vals })
}

fn push_normalized<T: Scalar>(row: &mut [(u32, T)], cols: &mut Vec<u32>, vals: &mut Vec<T>) {
    row.sort_by_key(|&(c, _)| c);
    let total = row.iter().fold(T::zero(), |acc, &(_, v)| acc + v);
    for &(c, v) in row.iter() {
        cols.push(c);
        vals.push(v / total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> SystemParams<f64> {
        SystemParams::new(0.4, 0.25, 1.0 / 3.0, 1.0 / 3.0)
    }

    #[test]
    fn state_counts() {
        assert_eq!(build_chain(&reference(), RelayPolicy::NoRelay, 5).unwrap().states().len(), 5);
        let nb = build_chain(&reference(), RelayPolicy::NoBufferPreempt, 4).unwrap();
        assert_eq!(nb.states().len(), 10);
        let buffer = build_chain(&reference(), RelayPolicy::BufferPreempt, 4).unwrap();
        assert_eq!(buffer.states().len(), 14);
        for s in [AgeState::Three(3, 2, 1), AgeState::Three(4, 2, 1), AgeState::Three(4, 3, 1), AgeState::Three(4, 3, 2)] {
            assert!(buffer.index_of(s).is_some());
        }
        for policy in RelayPolicy::ALL {
            for cap in 3..30 {
                let states = enumerate(policy, cap);
                assert_eq!(states.len() as u64, state_count(policy, cap));
                for (i, &s) in states.iter().enumerate() {
                    assert_eq!(position(s), i);
                }
            }
        }
    }

    #[test]
    fn empty_relay_row() {
        let row = transition_row(AgeState::Two(5, 0), &reference(), RelayPolicy::NoBufferPreempt).unwrap();
        let expect = [(AgeState::Two(6, 0), 0.8), (AgeState::Two(6, 1), 0.1), (AgeState::Two(1, 0), 0.1)];
        assert_eq!(row.len(), 3);
        for ((s, v), (es, ev)) in row.iter().zip(expect) {
            assert_eq!(*s, es);
            assert!((v - ev).abs() < 1e-15);
        }
    }

    #[test]
    fn direct_only_row() {
        let row = transition_row(AgeState::One(7), &reference(), RelayPolicy::NoRelay).unwrap();
        assert_eq!(row.len(), 2);
        assert_eq!(row[0].0, AgeState::One(8));
        assert!((row[0].1 - 0.9).abs() < 1e-15);
        assert_eq!(row[1], (AgeState::One(1), 0.1));
    }

    #[test]
    fn silent_source_with_perfect_relay_link() {
        let params = SystemParams::new(0.0, 0.5, 0.5, 1.0);
        let row = transition_row(AgeState::Three(6, 4, 2), &params, RelayPolicy::BufferPreempt).unwrap();
        assert_eq!(row, vec![(AgeState::Three(5, 3, 0), 1.0)]);
    }

    #[test]
    fn malformed_state_is_rejected() {
        let err = transition_row(AgeState::Two(3, 3), &reference(), RelayPolicy::NoBufferPreempt).unwrap_err();
        assert!(matches!(err, Error::BadState { .. }));
    }

    #[test]
    fn caps_are_guarded() {
        assert!(matches!(build_chain(&reference(), RelayPolicy::NoRelay, 2), Err(Error::CapTooSmall { .. })));
        assert!(matches!(build_chain(&reference(), RelayPolicy::NoRelay, 20_001), Err(Error::CapTooLarge { .. })));
        assert!(matches!(
            build_chain(&reference(), RelayPolicy::BufferPreempt, 2000),
            Err(Error::StateBudget { .. })
        ));
        let cap = default_cap(&reference(), RelayPolicy::NoBufferPreempt).unwrap();
        assert!(0.8f64.powi(cap as i32) * (cap as f64) < 1e-12);
        assert!(cap >= DEFAULT_CAP_FLOOR);
    }

    #[test]
    fn rows_are_stochastic() {
        for policy in RelayPolicy::ALL {
            let chain = build_chain(&reference(), policy, 12).unwrap();
            for i in 0..chain.size() {
                let total: f64 = chain.row(i).map(|(_, v)| v).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
