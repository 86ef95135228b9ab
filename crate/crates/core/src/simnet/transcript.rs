//! Run transcripts: everything a simulation observed, in deterministic
//! order, serializable as JSON lines.

use crate::encdom::{AuditEvent, AuditRecord, ValueTag};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunOutcome {
    /// Every round was decided by every correct process within budget.
    Completed,
    /// The liveness budget ran out with rounds still undecided somewhere.
    LivenessViolation { undecided_rounds: u64, at_tick: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MessageStats {
    pub pvoucher_sent: u64,
    pub pvoucher_delivered: u64,
    pub proposal_sent: u64,
    pub proposal_delivered: u64,
    pub bytes_sent: u64,
}

/// Proposal-exchange outcome for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainOutcome {
    /// The round's unique claimant, if there was exactly one.
    pub proposer: Option<u16>,
    /// Correct processes that accepted the leader's proposal.
    pub accepted_by: u32,
    /// Correct-process rejections of any proposal for the round.
    pub rejected: u32,
    /// Impersonated indices across all steal attempts.
    pub steal_attempts: u32,
    /// Accepted proposals whose proposer was not the claimant. Anything
    /// above zero means a stolen election.
    pub steal_accepts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundSummary {
    pub round: u64,
    pub permutation_start: u64,
    /// Tick at which the round's permutation batch was evaluated.
    pub start_tick: u64,
    pub first_decided_tick: u64,
    pub last_decided_tick: u64,
    /// Hex of the decrypted voucher.
    pub voucher: String,
    /// Every process whose ticket claims this round, corrupted or not.
    pub claimants: Vec<u16>,
    /// The unique claimant, when there is exactly one.
    pub leader: Option<u16>,
    pub chain: Option<ChainOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnvelopeRecord {
    pub from: u16,
    pub to: u16,
    pub kind: &'static str,
    pub bytes: u64,
    pub sent_tick: u64,
    pub delivered_tick: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    pub scenario_digest: String,
    pub seed: u64,
    pub outcome: RunOutcome,
    /// Tick of the last processed event.
    pub ticks: u64,
    pub messages: MessageStats,
    /// Binary gates charged per process over the whole run.
    pub gates_per_process: Vec<u64>,
    /// Handles still registered at the end; a memory regression guard.
    pub final_handle_count: usize,
    pub rounds: Vec<RoundSummary>,
    pub envelopes: Vec<EnvelopeRecord>,
    pub audit: Vec<AuditRecord>,
}

impl Transcript {
    pub fn completed(&self) -> bool {
        self.outcome == RunOutcome::Completed
    }

    /// Leader tallies per process, for fairness statistics. Rounds without a
    /// unique claimant count toward nobody.
    pub fn leader_counts(&self, n: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n];
        for r in &self.rounds {
            if let Some(leader) = r.leader {
                counts[usize::from(leader)] += 1;
            }
        }
        counts
    }

    /// True when every plaintext release in the audit log is a round
    /// voucher: no seed, ticket, or intermediate value ever left the domain
    /// through decryption.
    pub fn decrypts_only_vouchers(&self) -> bool {
        self.audit.iter().all(|rec| match &rec.event {
            AuditEvent::Decrypt { tag, .. } => matches!(tag, ValueTag::Voucher(_)),
            _ => true,
        })
    }

    /// True if any decryption targeted the setup seed.
    pub fn seed_was_decrypted(&self) -> bool {
        self.audit.iter().any(|rec| {
            matches!(
                &rec.event,
                AuditEvent::Decrypt {
                    tag: ValueTag::Seed,
                    ..
                }
            )
        })
    }

    /// One JSON object per line: header, then rounds, envelopes, and audit
    /// records.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            line: &'static str,
            scenario_digest: &'a str,
            seed: u64,
            outcome: &'a RunOutcome,
            ticks: u64,
            messages: &'a MessageStats,
            gates_per_process: &'a [u64],
            final_handle_count: usize,
        }
        #[derive(Serialize)]
        struct Line<'a, T: Serialize> {
            line: &'static str,
            #[serde(flatten)]
            body: &'a T,
        }
        let mut out = String::new();
        let header = Header {
            line: "header",
            scenario_digest: &self.scenario_digest,
            seed: self.seed,
            outcome: &self.outcome,
            ticks: self.ticks,
            messages: &self.messages,
            gates_per_process: &self.gates_per_process,
            final_handle_count: self.final_handle_count,
        };
        out.push_str(&serde_json::to_string(&header).expect("transcripts serialize"));
        out.push('\n');
        for body in &self.rounds {
            out.push_str(
                &serde_json::to_string(&Line {
                    line: "round",
                    body,
                })
                .expect("transcripts serialize"),
            );
            out.push('\n');
        }
        for body in &self.envelopes {
            out.push_str(
                &serde_json::to_string(&Line {
                    line: "envelope",
                    body,
                })
                .expect("transcripts serialize"),
            );
            out.push('\n');
        }
        for body in &self.audit {
            out.push_str(
                &serde_json::to_string(&Line { line: "audit", body })
                    .expect("transcripts serialize"),
            );
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encdom::HandleId;

    fn sample() -> Transcript {
        Transcript {
            scenario_digest: "abc123".into(),
            seed: 7,
            outcome: RunOutcome::Completed,
            ticks: 3,
            messages: MessageStats {
                pvoucher_sent: 6,
                pvoucher_delivered: 6,
                proposal_sent: 0,
                proposal_delivered: 0,
                bytes_sent: 594,
            },
            gates_per_process: vec![100, 100, 100],
            final_handle_count: 4,
            rounds: vec![RoundSummary {
                round: 1,
                permutation_start: 1,
                start_tick: 0,
                first_decided_tick: 1,
                last_decided_tick: 1,
                voucher: "00ff".into(),
                claimants: vec![2],
                leader: Some(2),
                chain: None,
            }],
            envelopes: vec![],
            audit: vec![AuditRecord {
                seq: 0,
                tick: Some(1),
                round: Some(1),
                event: AuditEvent::Decrypt {
                    handle: HandleId::from_bytes([0; 16]),
                    tag: ValueTag::Voucher(1),
                    issuers: vec![0, 1],
                    stake: 2,
                },
            }],
        }
    }

    #[test]
    fn jsonl_shape() {
        let t = sample();
        let text = t.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["line"], "header");
        assert_eq!(header["outcome"]["status"], "completed");
        assert_eq!(header["messages"]["pvoucher_sent"], 6);
        let round: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(round["line"], "round");
        assert_eq!(round["leader"], 2);
        let audit: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(audit["line"], "audit");
        assert_eq!(audit["event"], "decrypt");
    }

    #[test]
    fn voucher_only_decryption_helpers() {
        let mut t = sample();
        assert!(t.decrypts_only_vouchers());
        assert!(!t.seed_was_decrypted());
        t.audit.push(AuditRecord {
            seq: 1,
            tick: None,
            round: None,
            event: AuditEvent::Decrypt {
                handle: HandleId::from_bytes([1; 16]),
                tag: ValueTag::Seed,
                issuers: vec![0],
                stake: 2,
            },
        });
        assert!(!t.decrypts_only_vouchers());
        assert!(t.seed_was_decrypted());
    }

    #[test]
    fn leader_counts_skip_unclaimed_rounds() {
        let mut t = sample();
        t.rounds.push(RoundSummary {
            round: 2,
            permutation_start: 2,
            start_tick: 2,
            first_decided_tick: 3,
            last_decided_tick: 3,
            voucher: "0102".into(),
            claimants: vec![],
            leader: None,
            chain: None,
        });
        assert_eq!(t.leader_counts(3), vec![0, 0, 1]);
    }
}
