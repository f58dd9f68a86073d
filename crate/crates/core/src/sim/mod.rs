//! Slot-level Monte Carlo simulation of the relay-assisted link.

mod audit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::AgeState;
use crate::params::{RelayPolicy, SystemParams};
use crate::pmf::AoiPmf;

pub use audit::{transition_histogram, AuditCell, ClassAudit, TransitionAudit, AUDIT_MIN_VISITS, AUDIT_Z_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams<f64>,
    pub policy: RelayPolicy,
    /// Total slots simulated, burn-in included.
    pub slots: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Ages above this are pooled into the tail of the empirical PMF.
    pub age_cap: u32,
}

impl SimConfig {
    pub fn new(params: SystemParams<f64>, policy: RelayPolicy, slots: u64, seed: u64) -> Self {
        Self { params, policy, slots, burn_in: (slots / 1000).min(10_000), seed, age_cap: 10_000 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.params.p), ("p1", self.params.p1), ("p2", self.params.p2), ("p3", self.params.p3)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        if self.slots <= self.burn_in {
            return Err(Error::InvalidConfig(format!("slots ({}) must exceed burn-in ({})", self.slots, self.burn_in)));
        }
        if self.age_cap < 2 {
            return Err(Error::InvalidConfig(format!("age cap {} is below 2", self.age_cap)));
        }
        Ok(())
    }

    pub fn slots_used(&self) -> u64 {
        self.slots - self.burn_in
    }
}

/// Physical state at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimState {
    pub aoi: u64,
    /// Age of the packet the relay is forwarding, 0 when empty.
    pub relay_age: u64,
    /// Age of the buffered packet, 0 when empty.
    pub buffer_age: u64,
}

impl SimState {
    pub const INITIAL: SimState = SimState { aoi: 1, relay_age: 0, buffer_age: 0 };

    pub fn is_consistent(&self, policy: RelayPolicy) -> bool {
        let relay_ok = self.relay_age == 0 || self.aoi > self.relay_age;
        let buffer_ok = self.buffer_age == 0 || (self.relay_age > self.buffer_age);
        let shape_ok = match policy {
            RelayPolicy::NoRelay => self.relay_age == 0 && self.buffer_age == 0,
            RelayPolicy::NoBufferPreempt | RelayPolicy::NoBufferNoPreempt => self.buffer_age == 0,
            RelayPolicy::BufferPreempt => true,
        };
        self.aoi >= 1 && relay_ok && buffer_ok && shape_ok
    }

    /// The matching age-state, if every component fits in `u32`.
    pub fn age_state(&self, policy: RelayPolicy) -> Option<AgeState> {
        let c = |x: u64| u32::try_from(x).ok();
        Some(AgeState::from_components(policy, c(self.aoi)?, c(self.relay_age)?, c(self.buffer_age)?))
    }
}

/// Advances one slot.
///
/// `draws` are four independent uniforms: arrival, source–destination,
/// source–relay and relay–destination outcomes, in that order.
pub fn step(state: SimState, draws: [f64; 4], params: &SystemParams<f64>, policy: RelayPolicy) -> SimState {
    let arrival = draws[0] < params.p;
    let direct = arrival && draws[1] < params.p1;
    let relayed = policy != RelayPolicy::NoRelay;
    let to_relay = relayed && arrival && draws[2] < params.p2;
    let forwarded = relayed && state.relay_age >= 1 && draws[3] < params.p3;

    let aoi = if direct {
        1
    } else if forwarded {
        state.relay_age + 1
    } else {
        state.aoi + 1
    };
    if direct {
        // Feedback clears everything the relay holds.
        return SimState { aoi, relay_age: 0, buffer_age: 0 };
    }
    let aged = |age: u64| if age == 0 { 0 } else { age + 1 };
    let (relay_age, buffer_age) = match policy {
        RelayPolicy::NoRelay => (0, 0),
        RelayPolicy::NoBufferPreempt => match (to_relay, forwarded) {
            (true, _) => (1, 0),
            (false, true) => (0, 0),
            (false, false) => (aged(state.relay_age), 0),
        },
        RelayPolicy::NoBufferNoPreempt => {
            if state.relay_age == 0 {
                (u64::from(to_relay), 0)
            } else if forwarded {
                (0, 0)
            } else {
                (state.relay_age + 1, 0)
            }
        }
        RelayPolicy::BufferPreempt => {
            if state.relay_age == 0 {
                (u64::from(to_relay), 0)
            } else if forwarded {
                // The buffered packet, or a fresher arrival, moves up to the transmitter.
                if to_relay {
                    (1, 0)
                } else {
                    (aged(state.buffer_age), 0)
                }
            } else if to_relay {
                (state.relay_age + 1, 1)
            } else {
                (state.relay_age + 1, aged(state.buffer_age))
            }
        }
    };
    SimState { aoi, relay_age, buffer_age }
}

/// Random stream for one run; replicas use distinct ChaCha streams of the same seed.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
fn draw4(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [rng.gen(), rng.gen(), rng.gen(), rng.gen()]
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub pmf: AoiPmf<f64>,
    /// Sample mean of the AoI over the recorded slots.
    pub mean: f64,
    pub variance: f64,
    pub slots_used: u64,
    pub transition_counts: Option<TransitionAudit>,
}

/// Raw tallies, mergeable across replicas.
#[derive(Debug, Clone, PartialEq)]
struct Tally {
    counts: Vec<u64>,
    above_cap: u64,
    sum: u128,
    sum_sq: u128,
}

impl Tally {
    fn new(age_cap: u32) -> Self {
        Self { counts: vec![0; age_cap as usize], above_cap: 0, sum: 0, sum_sq: 0 }
    }

    #[inline]
    fn record(&mut self, aoi: u64) {
        match self.counts.get_mut(aoi as usize - 1) {
            Some(c) => *c += 1,
            None => self.above_cap += 1,
        }
        self.sum += aoi as u128;
        self.sum_sq += (aoi as u128) * (aoi as u128);
    }

    fn merge(mut self, other: &Tally) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.above_cap += other.above_cap;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    fn finish(self, transition_counts: Option<TransitionAudit>) -> Result<EmpiricalResult> {
        let total = self.counts.iter().sum::<u64>() + self.above_cap;
        let scale = 1.0 / total as f64;
        let mut probs: Vec<f64> = self.counts.iter().map(|&c| c as f64 * scale).collect();
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        let tail = self.above_cap as f64 * scale;
        let mean = self.sum as f64 * scale;
        let variance = (self.sum_sq as f64 * scale - mean * mean).max(0.0);
        let pmf = AoiPmf::new(probs, tail)?;
        Ok(EmpiricalResult { pmf, mean, variance, slots_used: total, transition_counts })
    }
}

fn simulate(config: &SimConfig, stream: u64, mut audit: Option<&mut audit::Recorder>) -> Tally {
    let mut rng = rng_for(config.seed, stream);
    let mut state = SimState::INITIAL;
    let mut tally = Tally::new(config.age_cap);
    for slot in 0..config.slots {
        let next = step(state, draw4(&mut rng), &config.params, config.policy);
        if slot >= config.burn_in {
            if let Some(rec) = audit.as_deref_mut() {
                rec.observe(state, next);
            }
            tally.record(next.aoi);
        }
        state = next;
    }
    tally
}

/// Runs one replica; bit-identical for identical configs.
pub fn run(config: &SimConfig) -> Result<EmpiricalResult> {
    config.validate()?;
    simulate(config, 0, None).finish(None)
}

/// Runs `replicas` independent streams in parallel and pools their tallies.
///
/// Replica 0 is the stream used by [`run`]; pooling order is fixed, so the result
/// is deterministic.
pub fn run_replicated(config: &SimConfig, replicas: u64) -> Result<EmpiricalResult> {
    config.validate()?;
    let tallies: Vec<Tally> = (0..replicas.max(1)).into_par_iter().map(|r| simulate(config, r, None)).collect();
    let first = tallies[0].clone();
    tallies[1..].iter().fold(first, Tally::merge).finish(None)
}

/// Like [`run`], also recording the transition-table audit.
pub fn run_audited(config: &SimConfig) -> Result<EmpiricalResult> {
    config.validate()?;
    let mut recorder = audit::Recorder::new(config)?;
    let tally = simulate(config, 0, Some(&mut recorder));
    tally.finish(Some(recorder.finish()))
}
