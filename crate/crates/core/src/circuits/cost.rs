//! Gate and depth accounting for circuit evaluations.
//!
//! Two models are tracked. The binary model counts gates with unit constants:
//! comparisons cost `n * ceil(log2 s_t)`, selection costs `n^2`, the keyed
//! primitives cost a fixed 4218 AND gates each. The arithmetic model records
//! multiplicative depth per circuit; rescaling has no known arithmetic
//! realization and reports as unavailable.
//!
//! Counters live in an explicit [`CostAccumulator`] owned by whoever drives
//! the evaluation; there is no global state.

use crate::config::CircuitConfig;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

/// AND-gate count of one keyed-primitive evaluation (PRF or digest) in the
/// binary model. Constant in committee size.
pub const KEYED_PRIMITIVE_GATES: u64 = 4218;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CircuitId {
    /// Strict compare of an encrypted word against a plaintext bound array.
    CmpLtPlain,
    /// Strict compare of an encrypted word against an encrypted bound array.
    CmpLtEnc,
    /// Difference chain isolating the first set bit.
    FirstOne,
    /// One-hot selection (dot product).
    Select,
    /// Keyed pseudorandom function.
    Prf,
    /// Digest.
    Hash,
    /// Draw rescaling by widening multiply.
    Scale,
    /// Masked subtraction.
    SubMasked,
}

impl CircuitId {
    pub const ALL: [CircuitId; 8] = [
        CircuitId::CmpLtPlain,
        CircuitId::CmpLtEnc,
        CircuitId::FirstOne,
        CircuitId::Select,
        CircuitId::Prf,
        CircuitId::Hash,
        CircuitId::Scale,
        CircuitId::SubMasked,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CircuitId::CmpLtPlain => "cmp-lt-plain",
            CircuitId::CmpLtEnc => "cmp-lt-enc",
            CircuitId::FirstOne => "first-one",
            CircuitId::Select => "select",
            CircuitId::Prf => "prf",
            CircuitId::Hash => "hash",
            CircuitId::Scale => "scale",
            CircuitId::SubMasked => "sub-masked",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }
}

/// Binary-model gate count of one invocation.
///
/// `len` is the vector length the invocation touches; `stake_bits` the bit
/// width of stake-domain operands.
pub fn binary_gates(id: CircuitId, len: usize, stake_bits: u32) -> u64 {
    let n = len as u64;
    let b = u64::from(stake_bits.max(1));
    match id {
        CircuitId::CmpLtPlain | CircuitId::CmpLtEnc => n * b,
        CircuitId::FirstOne | CircuitId::SubMasked => n,
        CircuitId::Select => n * n,
        CircuitId::Prf | CircuitId::Hash => KEYED_PRIMITIVE_GATES,
        CircuitId::Scale => b * b,
    }
}

/// Arithmetic-model multiplicative depth of one invocation, `None` where the
/// model has no realization (rescaling).
pub fn multiplicative_depth(id: CircuitId, len: usize, stake_bits: u32) -> Option<u64> {
    let n = (len as u64).max(1);
    let b = u64::from(stake_bits.max(1));
    match id {
        CircuitId::CmpLtPlain => Some(2),
        CircuitId::FirstOne => Some(1),
        CircuitId::Select => Some(1),
        CircuitId::Prf | CircuitId::Hash => Some(6),
        CircuitId::CmpLtEnc => Some(ceil_log2(n * b).max(1)),
        CircuitId::Scale => None,
        CircuitId::SubMasked => Some(1),
    }
}

fn ceil_log2(x: u64) -> u64 {
    debug_assert!(x >= 1);
    u64::from(64 - (x - 1).leading_zeros()).min(63)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitCounter {
    pub invocations: u64,
    pub binary_gates: u64,
}

/// Per-circuit invocation and gate counters for one evaluation scope
/// (typically one process in one run).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostAccumulator {
    counters: [CircuitCounter; 8],
}

impl CostAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, id: CircuitId, gates: u64) {
        let c = &mut self.counters[id.index()];
        c.invocations += 1;
        c.binary_gates += gates;
    }

    pub fn counter(&self, id: CircuitId) -> CircuitCounter {
        self.counters[id.index()]
    }

    pub fn merge(&mut self, other: &CostAccumulator) {
        for (mine, theirs) in self.counters.iter_mut().zip(&other.counters) {
            mine.invocations += theirs.invocations;
            mine.binary_gates += theirs.binary_gates;
        }
    }

    pub fn total_invocations(&self) -> u64 {
        self.counters.iter().map(|c| c.invocations).sum()
    }

    pub fn total_binary_gates(&self) -> u64 {
        self.counters.iter().map(|c| c.binary_gates).sum()
    }
}

/// Canonical invocation profile of one election round.
///
/// An initial round of a permutation (and every round when `d = 1`) runs:
/// draw PRF, plaintext compare, first-one, three selections, proof PRF,
/// digest. A continuation round swaps the plaintext compare for masked
/// subtraction, rescale and encrypted compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundKind {
    Initial,
    Continuation,
}

pub fn round_profile(kind: RoundKind) -> Vec<CircuitId> {
    match kind {
        RoundKind::Initial => vec![
            CircuitId::Prf,
            CircuitId::CmpLtPlain,
            CircuitId::FirstOne,
            CircuitId::Select,
            CircuitId::Select,
            CircuitId::Select,
            CircuitId::Prf,
            CircuitId::Hash,
        ],
        RoundKind::Continuation => vec![
            CircuitId::Prf,
            CircuitId::SubMasked,
            CircuitId::Scale,
            CircuitId::CmpLtEnc,
            CircuitId::FirstOne,
            CircuitId::Select,
            CircuitId::Select,
            CircuitId::Select,
            CircuitId::Prf,
            CircuitId::Hash,
        ],
    }
}

/// Binary-model gates of one round under the canonical profile.
pub fn round_binary_gates(kind: RoundKind, n: usize, stake_bits: u32) -> u64 {
    round_profile(kind)
        .into_iter()
        .map(|id| binary_gates(id, n, stake_bits))
        .sum()
}

/// The committee-size-dependent part of the round gate count: every circuit
/// in the profile except the constant-size keyed primitives. This is the
/// quantity whose growth is quadratic in `n`.
pub fn round_scaling_gates(kind: RoundKind, n: usize, stake_bits: u32) -> u64 {
    round_profile(kind)
        .into_iter()
        .filter(|id| !matches!(id, CircuitId::Prf | CircuitId::Hash))
        .map(|id| binary_gates(id, n, stake_bits))
        .sum()
}

/// Arithmetic-model depth of one round along its critical path.
///
/// The draw PRF depends only on setup material and the round number, so it
/// pipelines ahead of the round and stays off the path. Parallel selections
/// count once. A continuation round contains a rescale, for which the
/// arithmetic model has no realization, so its depth is `None`.
pub fn round_depth(kind: RoundKind, n: usize, stake_bits: u32) -> Option<u64> {
    let path: &[CircuitId] = match kind {
        RoundKind::Initial => &[
            CircuitId::CmpLtPlain,
            CircuitId::FirstOne,
            CircuitId::Select,
            CircuitId::Prf,
            CircuitId::Hash,
        ],
        RoundKind::Continuation => &[
            CircuitId::SubMasked,
            CircuitId::Scale,
            CircuitId::CmpLtEnc,
            CircuitId::FirstOne,
            CircuitId::Select,
            CircuitId::Prf,
            CircuitId::Hash,
        ],
    };
    path.iter()
        .map(|&id| multiplicative_depth(id, n, stake_bits))
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostRow {
    pub circuit: String,
    pub invocations: u64,
    pub binary_gates: u64,
    pub gates_per_invocation: u64,
    pub depth: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTotals {
    pub binary_gates: u64,
    pub scaling_gates: u64,
    pub depth: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Communication {
    pub messages_per_round: u64,
    pub share_bits: u64,
    pub round_bits: u64,
}

/// Per-circuit cost table plus per-round totals and the communication figure,
/// for a committee of `n` processes with total stake `s_t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub total_stake: u64,
    pub stake_bits: u32,
    pub rows: Vec<CostRow>,
    pub initial_round: RoundTotals,
    pub continuation_round: RoundTotals,
    pub communication: Communication,
    pub accumulated: Option<CostAccumulator>,
}

impl CostReport {
    /// Build the formula-driven report; attach observed counters when an
    /// accumulator from a real run is available.
    pub fn new(
        n: usize,
        total_stake: u64,
        config: &CircuitConfig,
        accumulated: Option<&CostAccumulator>,
    ) -> Self {
        let stake_bits = 64 - total_stake.leading_zeros();
        let rows = CircuitId::ALL
            .iter()
            .map(|&id| {
                let per = binary_gates(id, n, stake_bits);
                let counter = accumulated.map(|a| a.counter(id)).unwrap_or_default();
                CostRow {
                    circuit: id.label().to_string(),
                    invocations: counter.invocations,
                    binary_gates: counter.binary_gates,
                    gates_per_invocation: per,
                    depth: multiplicative_depth(id, n, stake_bits),
                }
            })
            .collect();
        let totals = |kind| RoundTotals {
            binary_gates: round_binary_gates(kind, n, stake_bits),
            scaling_gates: round_scaling_gates(kind, n, stake_bits),
            depth: round_depth(kind, n, stake_bits),
        };
        let msgs = (n as u64) * (n as u64 - 1);
        let share_bits = u64::from(config.lambda) * u64::from(config.beta_cost);
        Self {
            n,
            total_stake,
            stake_bits,
            rows,
            initial_round: totals(RoundKind::Initial),
            continuation_round: totals(RoundKind::Continuation),
            communication: Communication {
                messages_per_round: msgs,
                share_bits,
                round_bits: msgs * share_bits,
            },
            accumulated: accumulated.cloned(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "cost model: n = {}, total stake = {} ({} bits)",
            self.n, self.total_stake, self.stake_bits
        );
        let _ = writeln!(
            out,
            "{:<14} {:>12} {:>14} {:>12} {:>8}",
            "circuit", "invocations", "binary gates", "gates/call", "depth"
        );
        for row in &self.rows {
            let depth = row
                .depth
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".to_string());
            let _ = writeln!(
                out,
                "{:<14} {:>12} {:>14} {:>12} {:>8}",
                row.circuit, row.invocations, row.binary_gates, row.gates_per_invocation, depth
            );
        }
        let fmt_round = |label: &str, t: &RoundTotals| {
            format!(
                "{label}: {} binary gates per round ({} excluding keyed primitives), arithmetic depth {}",
                t.binary_gates,
                t.scaling_gates,
                t.depth
                    .map(|d| d.to_string())
                    .unwrap_or_else(|| "unavailable".to_string())
            )
        };
        let _ = writeln!(out, "{}", fmt_round("initial round", &self.initial_round));
        let _ = writeln!(
            out,
            "{}",
            fmt_round("continuation round", &self.continuation_round)
        );
        let _ = writeln!(
            out,
            "communication: {} directed messages per round, {} bits per share, {} bits per round",
            self.communication.messages_per_round,
            self.communication.share_bits,
            self.communication.round_bits
        );
        out
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
