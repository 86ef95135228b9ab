//! Corrupted-process behavior.
//!
//! A strategy decides what a corrupted process puts on the wire in place of
//! its honest share broadcast. Corruption never grants extra power inside
//! the encryption domain: forged attestations fail verification, replays
//! hit rounds that are already decided, and withheld shares are tolerated
//! because correct stake alone exceeds the decryption threshold.

use super::wire::PVoucherMsg;
use serde::{Deserialize, Serialize};

/// Extra delivery delay requested by [`AdversaryStrategy::DelayMax`] sends.
pub const DELAY_MAX_TICKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryStrategy {
    #[default]
    Honest,
    /// Stay silent: evaluate nothing, send nothing.
    WithholdShares,
    /// Broadcast shares with corrupted attestations.
    ForgeShares,
    /// Re-broadcast the previous round's share message unchanged.
    Replay,
    /// Send a valid share to half the committee, a corrupted one to the rest.
    EquivocateShares,
    /// Behave correctly but request maximal delivery delay.
    DelayMax,
}

impl AdversaryStrategy {
    /// Whether a corrupted process under this strategy evaluates pipelines
    /// and produces shares at all.
    pub fn evaluates(self) -> bool {
        !matches!(self, AdversaryStrategy::WithholdShares)
    }

    /// Extra delivery delay applied to this sender's messages.
    pub fn extra_delay(self) -> u64 {
        match self {
            AdversaryStrategy::DelayMax => DELAY_MAX_TICKS,
            _ => 0,
        }
    }

    /// The message a corrupted sender emits to `recipient` in place of the
    /// honest share `msg`. `previous` is the sender's share message from the
    /// round before, if any.
    pub fn outgoing(
        self,
        msg: &PVoucherMsg,
        recipient: usize,
        previous: Option<&PVoucherMsg>,
    ) -> Option<PVoucherMsg> {
        match self {
            AdversaryStrategy::Honest | AdversaryStrategy::DelayMax => Some(msg.clone()),
            AdversaryStrategy::WithholdShares => None,
            AdversaryStrategy::ForgeShares => Some(corrupt_attestation(msg)),
            AdversaryStrategy::Replay => previous.cloned(),
            AdversaryStrategy::EquivocateShares => {
                if recipient % 2 == 0 {
                    Some(msg.clone())
                } else {
                    Some(corrupt_attestation(msg))
                }
            }
        }
    }

    pub const ALL: [AdversaryStrategy; 6] = [
        AdversaryStrategy::Honest,
        AdversaryStrategy::WithholdShares,
        AdversaryStrategy::ForgeShares,
        AdversaryStrategy::Replay,
        AdversaryStrategy::EquivocateShares,
        AdversaryStrategy::DelayMax,
    ];
}

fn corrupt_attestation(msg: &PVoucherMsg) -> PVoucherMsg {
    let mut out = msg.clone();
    for b in &mut out.attestation {
        *b ^= 0xFF;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encdom::HandleId;

    fn msg(round: u64) -> PVoucherMsg {
        PVoucherMsg {
            round,
            permutation: round,
            handle: HandleId::from_bytes([1; 16]),
            digest: [2; 32],
            index: 0,
            attestation: [3; 32],
        }
    }

    #[test]
    fn names_serialize_kebab_case() {
        let names: Vec<String> = AdversaryStrategy::ALL
            .iter()
            .map(|s| serde_json::to_value(s).unwrap().as_str().unwrap().to_owned())
            .collect();
        assert_eq!(
            names,
            vec![
                "honest",
                "withhold-shares",
                "forge-shares",
                "replay",
                "equivocate-shares",
                "delay-max"
            ]
        );
        let back: AdversaryStrategy = serde_json::from_str("\"equivocate-shares\"").unwrap();
        assert_eq!(back, AdversaryStrategy::EquivocateShares);
    }

    #[test]
    fn behavior_table() {
        let m = msg(5);
        let prev = msg(4);
        assert_eq!(
            AdversaryStrategy::Honest.outgoing(&m, 0, Some(&prev)),
            Some(m.clone())
        );
        assert_eq!(
            AdversaryStrategy::WithholdShares.outgoing(&m, 0, Some(&prev)),
            None
        );
        assert!(!AdversaryStrategy::WithholdShares.evaluates());
        let forged = AdversaryStrategy::ForgeShares
            .outgoing(&m, 0, None)
            .unwrap();
        assert_ne!(forged.attestation, m.attestation);
        assert_eq!(forged.round, m.round);
        assert_eq!(
            AdversaryStrategy::Replay.outgoing(&m, 0, Some(&prev)),
            Some(prev.clone())
        );
        assert_eq!(AdversaryStrategy::Replay.outgoing(&m, 0, None), None);
        let even = AdversaryStrategy::EquivocateShares
            .outgoing(&m, 2, None)
            .unwrap();
        let odd = AdversaryStrategy::EquivocateShares
            .outgoing(&m, 3, None)
            .unwrap();
        assert_eq!(even, m);
        assert_ne!(odd.attestation, m.attestation);
        assert_eq!(AdversaryStrategy::DelayMax.extra_delay(), DELAY_MAX_TICKS);
        assert_eq!(AdversaryStrategy::Honest.extra_delay(), 0);
    }
}
