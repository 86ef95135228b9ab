//! Byte codecs for the two message kinds on the simulated network.
//!
//! Formats are fixed so transcripts and byte counts are stable:
//!
//! ```text
//! pvoucher = 0x01 round:u64 permutation:u64 handle:16B digest:32B index:u16 attestation:32B
//! proposal = 0x02 round:u64 proposer:u16 proof_len:u16 proof block_len:u32 block
//! ```
//!
//! All integers big-endian. A pvoucher message is exactly 99 bytes.

use crate::chain::BlockProposal;
use crate::encdom::{DecryptionShare, HandleId};

pub const TAG_PVOUCHER: u8 = 0x01;
pub const TAG_PROPOSAL: u8 = 0x02;

/// One process's decryption share for one round's voucher, as broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PVoucherMsg {
    pub round: u64,
    pub permutation: u64,
    pub handle: HandleId,
    pub digest: [u8; 32],
    /// 0-based issuer index.
    pub index: u16,
    pub attestation: [u8; 32],
}

impl PVoucherMsg {
    pub const WIRE_LEN: usize = 1 + 8 + 8 + 16 + 32 + 2 + 32;

    pub fn from_share(round: u64, permutation: u64, share: &DecryptionShare) -> Self {
        Self {
            round,
            permutation,
            handle: share.handle,
            digest: share.payload_digest,
            index: share.issuer,
            attestation: share.attestation,
        }
    }

    pub fn share(&self) -> DecryptionShare {
        DecryptionShare {
            handle: self.handle,
            issuer: self.index,
            payload_digest: self.digest,
            attestation: self.attestation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    PVoucher(PVoucherMsg),
    Proposal(BlockProposal),
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::PVoucher(_) => "pvoucher",
            WireMessage::Proposal(_) => "proposal",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            WireMessage::PVoucher(m) => {
                let mut out = Vec::with_capacity(PVoucherMsg::WIRE_LEN);
                out.push(TAG_PVOUCHER);
                out.extend_from_slice(&m.round.to_be_bytes());
                out.extend_from_slice(&m.permutation.to_be_bytes());
                out.extend_from_slice(m.handle.as_bytes());
                out.extend_from_slice(&m.digest);
                out.extend_from_slice(&m.index.to_be_bytes());
                out.extend_from_slice(&m.attestation);
                out
            }
            WireMessage::Proposal(p) => {
                let mut out = Vec::with_capacity(1 + 8 + 2 + 2 + p.proof.len() + 4 + p.block.len());
                out.push(TAG_PROPOSAL);
                out.extend_from_slice(&p.round.to_be_bytes());
                out.extend_from_slice(&p.proposer.to_be_bytes());
                out.extend_from_slice(&(p.proof.len() as u16).to_be_bytes());
                out.extend_from_slice(&p.proof);
                out.extend_from_slice(&(p.block.len() as u32).to_be_bytes());
                out.extend_from_slice(&p.block);
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let (&tag, rest) = bytes.split_first()?;
        match tag {
            TAG_PVOUCHER => {
                if rest.len() != PVoucherMsg::WIRE_LEN - 1 {
                    return None;
                }
                Some(WireMessage::PVoucher(PVoucherMsg {
                    round: u64::from_be_bytes(rest[0..8].try_into().ok()?),
                    permutation: u64::from_be_bytes(rest[8..16].try_into().ok()?),
                    handle: HandleId::from_bytes(rest[16..32].try_into().ok()?),
                    digest: rest[32..64].try_into().ok()?,
                    index: u16::from_be_bytes(rest[64..66].try_into().ok()?),
                    attestation: rest[66..98].try_into().ok()?,
                }))
            }
            TAG_PROPOSAL => {
                if rest.len() < 8 + 2 + 2 {
                    return None;
                }
                let round = u64::from_be_bytes(rest[0..8].try_into().ok()?);
                let proposer = u16::from_be_bytes(rest[8..10].try_into().ok()?);
                let proof_len = usize::from(u16::from_be_bytes(rest[10..12].try_into().ok()?));
                let rest = &rest[12..];
                if rest.len() < proof_len + 4 {
                    return None;
                }
                let proof = rest[..proof_len].to_vec();
                let rest = &rest[proof_len..];
                let block_len = u32::from_be_bytes(rest[0..4].try_into().ok()?) as usize;
                let rest = &rest[4..];
                if rest.len() != block_len {
                    return None;
                }
                Some(WireMessage::Proposal(BlockProposal {
                    round,
                    proposer,
                    proof,
                    block: rest.to_vec(),
                }))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::block_payload;

    fn sample_pvoucher() -> PVoucherMsg {
        PVoucherMsg {
            round: 12,
            permutation: 10,
            handle: HandleId::from_bytes([0xA5; 16]),
            digest: [3; 32],
            index: 513,
            attestation: [9; 32],
        }
    }

    #[test]
    fn pvoucher_is_99_bytes_and_roundtrips() {
        let msg = WireMessage::PVoucher(sample_pvoucher());
        let bytes = msg.encode();
        assert_eq!(bytes.len(), 99);
        assert_eq!(PVoucherMsg::WIRE_LEN, 99);
        assert_eq!(WireMessage::decode(&bytes), Some(msg));
    }

    #[test]
    fn pvoucher_share_conversion_roundtrips() {
        let msg = sample_pvoucher();
        let share = msg.share();
        assert_eq!(PVoucherMsg::from_share(12, 10, &share), msg);
    }

    #[test]
    fn proposal_roundtrips() {
        let msg = WireMessage::Proposal(BlockProposal {
            round: 40,
            proposer: 2,
            proof: vec![7; 32],
            block: block_payload(40, 2),
        });
        let bytes = msg.encode();
        assert_eq!(WireMessage::decode(&bytes), Some(msg));
    }

    #[test]
    fn truncated_and_oversized_frames_are_rejected() {
        let msg = WireMessage::PVoucher(sample_pvoucher());
        let bytes = msg.encode();
        assert_eq!(WireMessage::decode(&bytes[..98]), None);
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(WireMessage::decode(&long), None);
        let proposal = WireMessage::Proposal(BlockProposal {
            round: 1,
            proposer: 0,
            proof: vec![1, 2, 3],
            block: vec![4],
        })
        .encode();
        for cut in 1..proposal.len() {
            assert_eq!(WireMessage::decode(&proposal[..cut]), None, "cut {cut}");
        }
        assert_eq!(WireMessage::decode(&[]), None);
        assert_eq!(WireMessage::decode(&[0x7F, 0, 0]), None);
    }
}
