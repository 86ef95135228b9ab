//! Block-proposal layer on top of the election.
//!
//! Once a round's voucher is decrypted, the elected process reveals its
//! proof inside a block proposal. Acceptance is a pure check: the proof must
//! hash to the voucher under the proposer's own committee position, so a
//! proof revealed by the true leader cannot be re-proposed under any other
//! index.

use crate::sortition::verify_claim;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockProposal {
    pub round: u64,
    /// 0-based proposer index.
    pub proposer: u16,
    pub proof: Vec<u8>,
    pub block: Vec<u8>,
}

/// Whether a correct process accepts a proposal for a round whose decrypted
/// voucher is `voucher`.
pub fn accepts(proposal: &BlockProposal, voucher: &[u8], lambda: u32) -> bool {
    proposal.round >= 1
        && verify_claim(
            usize::from(proposal.proposer),
            &proposal.proof,
            voucher,
            lambda,
        )
}

/// Deterministic stand-in for block content at desk scale.
pub fn block_payload(round: u64, proposer: u16) -> Vec<u8> {
    format!("block/{round}/{proposer}").into_bytes()
}

/// Where each round's pipeline is evaluated when permutations are staggered
/// `spacing` ticks apart. All `d` rounds of a permutation are evaluated in
/// one batch, since the continuation pipeline needs no decryption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineSlot {
    pub round: u64,
    pub permutation_start: u64,
    pub evaluation_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelinePlan {
    pub d: u64,
    pub spacing: u64,
    pub slots: Vec<PipelineSlot>,
}

pub fn pipeline_plan(d: u64, rounds: u64, spacing: u64) -> PipelinePlan {
    assert!(d >= 1, "permutation length starts at 1");
    let slots = (1..=rounds)
        .map(|round| {
            let permutation_start = round - ((round - 1) % d);
            let perm_index = (permutation_start - 1) / d;
            PipelineSlot {
                round,
                permutation_start,
                evaluation_tick: perm_index * spacing,
            }
        })
        .collect();
    PipelinePlan { d, spacing, slots }
}
