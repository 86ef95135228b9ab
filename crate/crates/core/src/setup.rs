//! Setup ceremony: XOR-combination of per-process random contributions into
//! encrypted PRF tickets and an encrypted seed.
//!
//! Each contributor submits `n + 1` random words: one ticket word per
//! committee member plus one seed word. Words are combined element-wise by
//! XOR, so the result is uniform as long as one contributor sampled honestly.
//! The combined ticket for process `i` is encrypted into the public ticket
//! vector and privately delivered to `i` alone; the combined seed is
//! encrypted and its plaintext is discarded, never to leave the domain.
//!
//! Agreement on the contribution set is a consensus concern outside this
//! module; [`Ceremony::run`] models the post-agreement combine as one atomic
//! step.

use crate::encdom::{CipherHandle, EncDomain, Plain, ValueTag};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetupError {
    #[error("no contributions supplied")]
    NoContributions,
    #[error("duplicate contribution from process {0}")]
    DuplicateContributor(u16),
    #[error("contribution from unknown process {0}")]
    UnknownContributor(u16),
    #[error("contribution from process {issuer} has {have} words, ceremony needs {need}")]
    WrongWordCount { issuer: u16, have: usize, need: usize },
    #[error("contribution word {value:#x} exceeds the {beta_x}-bit domain")]
    WordOutOfRange { value: u64, beta_x: u32 },
    #[error("contributors carry stake {have}, ceremony needs at least {need}")]
    InsufficientStake { have: u64, need: u64 },
    #[error("process {requester} asked for the ticket of process {index}")]
    NotYourTicket { index: u16, requester: u16 },
    #[error("ticket index {0} out of bounds")]
    TicketOutOfRange(usize),
}

/// One process's randomness for the ceremony: `n` ticket words plus one
/// seed word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub issuer: u16,
    pub words: Vec<u64>,
}

impl Contribution {
    pub fn new(issuer: u16, words: Vec<u64>) -> Self {
        Self { issuer, words }
    }

    /// Sample a fresh contribution for a committee of `n`.
    pub fn random(issuer: u16, n: usize, beta_x: u32, rng: &mut impl Rng) -> Self {
        let mask = if beta_x == 64 {
            u64::MAX
        } else {
            (1u64 << beta_x) - 1
        };
        let words = (0..=n).map(|_| rng.gen::<u64>() & mask).collect();
        Self { issuer, words }
    }
}

/// Public output of the ceremony: the encrypted ticket vector and the
/// encrypted seed.
#[derive(Debug, Clone)]
pub struct SetupArtifacts {
    pub tickets: Vec<CipherHandle>,
    pub seed: CipherHandle,
}

/// The completed ceremony. Holds the plaintext ticket words solely to stand
/// in for private delivery channels; the combined seed word is dropped at
/// construction and has no accessor.
pub struct Ceremony {
    ticket_words: Vec<u64>,
    artifacts: SetupArtifacts,
}

impl Ceremony {
    /// Combine an agreed contribution set and encrypt the results.
    ///
    /// Contributors must be distinct committee members whose stakes sum to
    /// at least `s_t - s_f`, which guarantees at least one correct process
    /// is among them.
    pub fn run(dom: &mut EncDomain, contributions: &[Contribution]) -> Result<Self, SetupError> {
        let n = dom.table().len();
        let need_words = n + 1;
        let beta_x = dom.config().beta_x;
        if contributions.is_empty() {
            return Err(SetupError::NoContributions);
        }
        let mut seen = vec![false; n];
        let mut stake = 0u64;
        for c in contributions {
            let issuer = usize::from(c.issuer);
            if issuer >= n {
                return Err(SetupError::UnknownContributor(c.issuer));
            }
            if seen[issuer] {
                return Err(SetupError::DuplicateContributor(c.issuer));
            }
            seen[issuer] = true;
            if c.words.len() != need_words {
                return Err(SetupError::WrongWordCount {
                    issuer: c.issuer,
                    have: c.words.len(),
                    need: need_words,
                });
            }
            for &w in &c.words {
                if !dom.config().word_in_range(w) {
                    return Err(SetupError::WordOutOfRange { value: w, beta_x });
                }
            }
            stake += dom.table().stake(issuer);
        }
        let need = dom.table().total() - dom.table().byzantine_bound();
        if stake < need {
            return Err(SetupError::InsufficientStake { have: stake, need });
        }

        let mut combined = vec![0u64; need_words];
        for c in contributions {
            for (acc, w) in combined.iter_mut().zip(&c.words) {
                *acc ^= w;
            }
        }
        let seed_word = combined[n];
        let ticket_words: Vec<u64> = combined[..n].to_vec();

        let tickets = ticket_words
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                dom.enc(Plain::word(w), ValueTag::Ticket(i as u16))
                    .expect("validated words encrypt")
            })
            .collect();
        let seed = dom
            .enc(Plain::word(seed_word), ValueTag::Seed)
            .expect("validated words encrypt");

        Ok(Self {
            ticket_words,
            artifacts: SetupArtifacts { tickets, seed },
        })
    }

    pub fn artifacts(&self) -> &SetupArtifacts {
        &self.artifacts
    }

    /// Private delivery of one plaintext ticket to its owner. Any other
    /// requester is refused, and both outcomes land in the audit log.
    pub fn deliver_ticket(
        &self,
        dom: &mut EncDomain,
        index: usize,
        requester: usize,
    ) -> Result<u64, SetupError> {
        if index >= self.ticket_words.len() {
            return Err(SetupError::TicketOutOfRange(index));
        }
        if requester != index {
            dom.note_ticket_denied(index as u16, requester as u16);
            return Err(SetupError::NotYourTicket {
                index: index as u16,
                requester: requester as u16,
            });
        }
        dom.note_ticket_release(index as u16);
        Ok(self.ticket_words[index])
    }
}
