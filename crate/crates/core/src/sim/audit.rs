//! Empirical audit of the simulator against the transition tables.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::markov::{table_row, StateClass};
use crate::params::RelayPolicy;

use super::{run_audited, SimConfig, SimState};

/// A cell passes when its frequency is within this many binomial standard deviations.
pub const AUDIT_Z_LIMIT: f64 = 4.0;
/// Conditional visits a state class needs before its row is judged.
pub const AUDIT_MIN_VISITS: u64 = 100_000;

/// Observed versus tabulated frequency of one successor pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub label: String,
    pub expected: f64,
    pub count: u64,
    pub frequency: f64,
    /// `(frequency - expected) / sqrt(expected (1 - expected) / visits)`; zero for degenerate cells that match exactly.
    pub z: f64,
}

impl AuditCell {
    pub fn passes(&self) -> bool {
        self.z.abs() <= AUDIT_Z_LIMIT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAudit {
    /// Table pattern of the current state, e.g. `(n,m,0)`.
    pub class: String,
    pub visits: u64,
    pub cells: Vec<AuditCell>,
    /// Transitions that matched no cell of the row.
    pub unmatched: u64,
}

impl ClassAudit {
    pub fn passes(&self, min_visits: u64) -> bool {
        self.visits >= min_visits && self.unmatched == 0 && self.cells.iter().all(AuditCell::passes)
    }
}

/// Conditional transition frequencies of a simulation run, per state class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionAudit {
    pub policy: RelayPolicy,
    pub classes: Vec<ClassAudit>,
}

impl TransitionAudit {
    pub fn passes(&self, min_visits: u64) -> bool {
        self.classes.iter().all(|c| c.passes(min_visits))
    }

    pub fn class(&self, pattern: &str) -> Option<&ClassAudit> {
        self.classes.iter().find(|c| c.class == pattern)
    }
}

pub(super) struct Recorder {
    config: SimConfig,
    classes: Vec<StateClass>,
    expected: Vec<Vec<(&'static str, f64)>>,
    visits: Vec<u64>,
    counts: Vec<Vec<u64>>,
    unmatched: Vec<u64>,
}

impl Recorder {
    pub(super) fn new(config: &SimConfig) -> Result<Self> {
        let classes = StateClass::for_policy(config.policy).to_vec();
        let mut expected = Vec::new();
        for class in &classes {
            let row = table_row(class.representative(config.policy), &config.params, config.policy)?;
            expected.push(row.into_iter().map(|e| (e.label, e.prob)).collect::<Vec<_>>());
        }
        let counts = expected.iter().map(|row| vec![0; row.len()]).collect();
        Ok(Self { config: *config, visits: vec![0; classes.len()], unmatched: vec![0; classes.len()], classes, expected, counts })
    }

    pub(super) fn observe(&mut self, from: SimState, to: SimState) {
        let policy = self.config.policy;
        let (Some(from), Some(to)) = (from.age_state(policy), to.age_state(policy)) else {
            return;
        };
        let class = StateClass::of(from);
        let Some(k) = self.classes.iter().position(|&c| c == class) else {
            return;
        };
        self.visits[k] += 1;
        let row = table_row(from, &self.config.params, policy).unwrap_or_default();
        match row.iter().position(|e| e.next == to) {
            Some(i) => self.counts[k][i] += 1,
            None => self.unmatched[k] += 1,
        }
    }

    pub(super) fn finish(self) -> TransitionAudit {
        let policy = self.config.policy;
        let mut classes = Vec::new();
        for (k, class) in self.classes.iter().enumerate() {
            let visits = self.visits[k];
            let cells = self.expected[k]
                .iter()
                .zip(&self.counts[k])
                .map(|(&(label, expected), &count)| {
                    let frequency = if visits == 0 { 0.0 } else { count as f64 / visits as f64 };
                    let sigma = (expected * (1.0 - expected) / visits.max(1) as f64).sqrt();
                    let z = if sigma > 0.0 {
                        (frequency - expected) / sigma
                    } else if (frequency - expected).abs() < 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    AuditCell { label: label.to_string(), expected, count, frequency, z }
                })
                .collect();
            classes.push(ClassAudit { class: class.pattern(policy).to_string(), visits, cells, unmatched: self.unmatched[k] });
        }
        TransitionAudit { policy, classes }
    }
}

/// Simulates `config` and tabulates conditional successor frequencies per state class.
pub fn transition_histogram(config: &SimConfig) -> Result<TransitionAudit> {
    Ok(run_audited(config)?.transition_counts.expect("audited runs record transitions"))
}
