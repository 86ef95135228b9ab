//! Release accounting for the encrypted domain.
//!
//! Every path by which hidden data can leave the domain appends a record
//! here: threshold decryptions, private ticket deliveries, and the explicit
//! audit accessors tests use to inspect payloads. The log is the evidence
//! tests check when asserting that a run released nothing beyond vouchers
//! and per-owner tickets.

use super::{HandleId, ValueTag};
use serde::Serialize;
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum AuditEvent {
    /// A threshold decryption released a payload.
    Decrypt {
        handle: HandleId,
        tag: ValueTag,
        issuers: Vec<u16>,
        stake: u64,
    },
    /// The setup ceremony handed a plaintext ticket to its owner.
    TicketRelease { index: u16 },
    /// A ticket request by anyone other than the owner was refused.
    TicketDenied { index: u16, requester: u16 },
    /// An audit accessor read a payload outside the protocol.
    AuditRead { handle: HandleId, tag: ValueTag },
}

impl AuditEvent {
    pub fn round(&self) -> Option<u64> {
        match self {
            AuditEvent::Decrypt { tag, .. } | AuditEvent::AuditRead { tag, .. } => tag.round(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRecord {
    pub seq: u64,
    /// Simulator tick at which the release happened, when a simulation drives
    /// the domain.
    pub tick: Option<u64>,
    pub round: Option<u64>,
    #[serde(flatten)]
    pub event: AuditEvent,
}

#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn append(&mut self, tick: Option<u64>, event: AuditEvent) {
        let seq = self.records.len() as u64;
        self.records.push(AuditRecord {
            seq,
            tick,
            round: event.round(),
            event,
        });
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line, in append order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut w, record)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_carry_round_from_tag() {
        let mut log = AuditLog::default();
        log.append(
            Some(3),
            AuditEvent::Decrypt {
                handle: HandleId::from_bytes([7; 16]),
                tag: ValueTag::Voucher(9),
                issuers: vec![0, 2],
                stake: 4,
            },
        );
        log.append(None, AuditEvent::TicketRelease { index: 1 });
        assert_eq!(log.records()[0].round, Some(9));
        assert_eq!(log.records()[1].round, None);
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"event\":\"decrypt\""));
        assert!(text.contains("\"round\":9"));
    }
}
