//! Declarative simulation scenarios.
//!
//! A scenario plus a seed fully determines a run; the scenario digest ties
//! transcripts and CLI output back to the exact configuration that produced
//! them.

use super::adversary::AdversaryStrategy;
use crate::config::{CircuitConfig, ConfigError};
use crate::stake::{StakeError, StakeTable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error(transparent)]
    Stake(#[from] StakeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("permutation length {d} must be between 1 and committee size {n}")]
    BadPermutationLength { d: u64, n: usize },
    #[error("a run needs at least one round")]
    NoRounds,
    #[error("corrupted process {0} is not in the committee")]
    UnknownCorrupted(u16),
    #[error("process {0} corrupted twice")]
    DuplicateCorrupted(u16),
    #[error("corrupted stake {have} exceeds the tolerated bound {bound}")]
    TooMuchCorruption { have: u64, bound: u64 },
    #[error("starved process {0} is not in the committee")]
    UnknownVictim(u16),
}

/// When the network delivers each sent message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SchedulePolicy {
    /// Every message arrives on the next tick, in send order.
    #[default]
    Fifo,
    /// Uniform extra delay in `0..=max_delay` ticks per message.
    Random { max_delay: u64 },
    /// Messages to one process are held until `release_tick`.
    Starve { victim: u16, release_tick: u64 },
    /// Corrupted senders' messages arrive first; correct senders' messages
    /// are delayed by `correct_delay` ticks.
    CorruptedFirst { correct_delay: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub stakes: Vec<u64>,
    /// Maximum total adversarial stake `s_f`.
    pub byzantine_bound: u64,
    /// Permutation length; 1 elects an independent leader each round.
    #[serde(default = "default_d")]
    pub d: u64,
    pub rounds: u64,
    #[serde(default = "default_beta_x")]
    pub beta_x: u32,
    #[serde(default = "default_lambda")]
    pub lambda: u32,
    #[serde(default)]
    pub corrupted: Vec<u16>,
    #[serde(default)]
    pub strategy: AdversaryStrategy,
    #[serde(default)]
    pub schedule: SchedulePolicy,
    /// Ticks between consecutive permutation evaluation starts.
    #[serde(default = "default_spacing")]
    pub start_spacing: u64,
    /// Run the block-proposal exchange after each decided round.
    #[serde(default)]
    pub enable_chain: bool,
    /// Keep one record per delivered message in the transcript.
    #[serde(default)]
    pub record_envelopes: bool,
    /// Liveness budget in ticks; 0 derives a generous bound.
    #[serde(default)]
    pub max_ticks: u64,
}

fn default_d() -> u64 {
    1
}

fn default_beta_x() -> u32 {
    crate::config::DEFAULT_BETA_X
}

fn default_lambda() -> u32 {
    crate::config::DEFAULT_LAMBDA
}

fn default_spacing() -> u64 {
    2
}

impl Scenario {
    /// Honest single-leader election over `stakes` at the largest tolerable
    /// Byzantine bound.
    pub fn honest(stakes: Vec<u64>, rounds: u64) -> Self {
        let total: u64 = stakes.iter().sum();
        Self {
            stakes,
            byzantine_bound: (total + 1) / 2 - 1,
            d: 1,
            rounds,
            beta_x: default_beta_x(),
            lambda: default_lambda(),
            corrupted: Vec::new(),
            strategy: AdversaryStrategy::Honest,
            schedule: SchedulePolicy::Fifo,
            start_spacing: default_spacing(),
            enable_chain: false,
            record_envelopes: false,
            max_ticks: 0,
        }
    }

    pub fn validate(&self) -> Result<(StakeTable, CircuitConfig), ScenarioError> {
        let table = StakeTable::new(self.stakes.clone(), self.byzantine_bound)?;
        let config = CircuitConfig::for_table(self.beta_x, self.lambda, &table)?;
        let n = table.len();
        if self.d == 0 || self.d > n as u64 {
            return Err(ScenarioError::BadPermutationLength { d: self.d, n });
        }
        if self.rounds == 0 {
            return Err(ScenarioError::NoRounds);
        }
        let mut seen = vec![false; n];
        let mut corrupted_stake = 0u64;
        for &c in &self.corrupted {
            let i = usize::from(c);
            if i >= n {
                return Err(ScenarioError::UnknownCorrupted(c));
            }
            if seen[i] {
                return Err(ScenarioError::DuplicateCorrupted(c));
            }
            seen[i] = true;
            corrupted_stake += table.stake(i);
        }
        if corrupted_stake > table.byzantine_bound() {
            return Err(ScenarioError::TooMuchCorruption {
                have: corrupted_stake,
                bound: table.byzantine_bound(),
            });
        }
        if let SchedulePolicy::Starve { victim, .. } = self.schedule {
            if usize::from(victim) >= n {
                return Err(ScenarioError::UnknownVictim(victim));
            }
        }
        Ok((table, config))
    }

    /// Number of permutations the run spans.
    pub fn permutations(&self) -> u64 {
        self.rounds.div_ceil(self.d)
    }

    /// Liveness budget: explicit `max_ticks`, or a bound generous enough
    /// for every supported schedule and strategy to finish well inside it.
    pub fn effective_max_ticks(&self) -> u64 {
        if self.max_ticks > 0 {
            return self.max_ticks;
        }
        let mut budget = self.start_spacing * self.permutations() + 128;
        budget += match self.schedule {
            SchedulePolicy::Fifo => 0,
            SchedulePolicy::Random { max_delay } => 2 * max_delay,
            SchedulePolicy::Starve { release_tick, .. } => release_tick + 2,
            SchedulePolicy::CorruptedFirst { correct_delay } => 2 * correct_delay,
        };
        budget += 2 * self.strategy.extra_delay();
        budget
    }

    /// Hex digest of the canonical scenario encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenarios serialize");
        let mut h = Sha256::new();
        h.update(b"sortition/scenario/v1");
        h.update(&json);
        hex::encode(h.finalize())
    }
}
