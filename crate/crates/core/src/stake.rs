//! Committee stake bookkeeping.
//!
//! A [`StakeTable`] fixes the committee for one protocol instance: one
//! positive integer stake per process plus the bound `s_f` on the total
//! stake an adversary may corrupt. Everything downstream (decryption
//! threshold, election windows, cost formulas) reads from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StakeError {
    #[error("committee must have at least one member")]
    EmptyCommittee,
    #[error("process {0} has zero stake; every member must hold at least one unit")]
    ZeroStake(usize),
    #[error("total stake overflows u64")]
    TotalOverflow,
    #[error("byzantine stake bound {bound} must be strictly below half the total stake {total}")]
    ByzantineBoundTooLarge { bound: u64, total: u64 },
}

/// Stake distribution of one committee.
///
/// Invariants enforced at construction: at least one member, every stake
/// is >= 1, and `2 * byzantine_bound < total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeTable {
    stakes: Vec<u64>,
    total: u64,
    byzantine_bound: u64,
}

impl StakeTable {
    pub fn new(stakes: Vec<u64>, byzantine_bound: u64) -> Result<Self, StakeError> {
        if stakes.is_empty() {
            return Err(StakeError::EmptyCommittee);
        }
        let mut total: u64 = 0;
        for (i, &s) in stakes.iter().enumerate() {
            if s == 0 {
                return Err(StakeError::ZeroStake(i));
            }
            total = total.checked_add(s).ok_or(StakeError::TotalOverflow)?;
        }
        // Strict: s_f < total/2, i.e. 2*s_f < total.
        if byzantine_bound
            .checked_mul(2)
            .map(|b| b >= total)
            .unwrap_or(true)
        {
            return Err(StakeError::ByzantineBoundTooLarge {
                bound: byzantine_bound,
                total,
            });
        }
        Ok(Self {
            stakes,
            total,
            byzantine_bound,
        })
    }

    pub fn len(&self) -> usize {
        self.stakes.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction rejects empty committees.
        false
    }

    pub fn stake(&self, process: usize) -> u64 {
        self.stakes[process]
    }

    pub fn stakes(&self) -> &[u64] {
        &self.stakes
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn byzantine_bound(&self) -> u64 {
        self.byzantine_bound
    }

    /// Stake that must back a decryption: shares from distinct issuers whose
    /// stakes sum to at least `s_f + 1`.
    pub fn decryption_threshold(&self) -> u64 {
        self.byzantine_bound + 1
    }

    /// Inclusive prefix sums `U[i] = S[0] + .. + S[i]`; last entry equals the total.
    pub fn prefix_sums(&self) -> Vec<u64> {
        let mut acc = 0u64;
        self.stakes
            .iter()
            .map(|&s| {
                acc += s;
                acc
            })
            .collect()
    }

    /// Bit length of the total stake: the word width the cost model charges
    /// for stake-domain comparisons and subtractions.
    pub fn stake_bits(&self) -> u32 {
        64 - self.total.leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid_table() {
        let t = StakeTable::new(vec![3, 1, 2], 2).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.total(), 6);
        assert_eq!(t.decryption_threshold(), 3);
        assert_eq!(t.prefix_sums(), vec![3, 4, 6]);
        assert_eq!(t.stake_bits(), 3);
    }

    #[test]
    fn rejects_zero_stake() {
        assert_eq!(
            StakeTable::new(vec![1, 0, 2], 1),
            Err(StakeError::ZeroStake(1))
        );
    }

    #[test]
    fn rejects_empty() {
        assert_eq!(StakeTable::new(vec![], 0), Err(StakeError::EmptyCommittee));
    }

    #[test]
    fn byzantine_bound_must_be_below_half() {
        // total 6: bound 3 would allow a corrupted majority of the threshold.
        assert_eq!(
            StakeTable::new(vec![3, 3], 3),
            Err(StakeError::ByzantineBoundTooLarge { bound: 3, total: 6 })
        );
        // bound 2 < 6/2 is fine.
        assert!(StakeTable::new(vec![3, 3], 2).is_ok());
        // equality 2*s_f == total is still too large.
        assert_eq!(
            StakeTable::new(vec![2, 2], 2),
            Err(StakeError::ByzantineBoundTooLarge { bound: 2, total: 4 })
        );
    }

    #[test]
    fn threshold_always_reachable_by_correct_stake() {
        // s_f < total/2 implies s_f + 1 <= total - s_f: the correct side can
        // always assemble a decryption on its own.
        for (stakes, bound) in [
            (vec![1u64, 1, 1, 1, 1], 2u64),
            (vec![10, 1, 1], 5),
            (vec![7], 3),
        ] {
            let t = StakeTable::new(stakes, bound).unwrap();
            assert!(t.decryption_threshold() <= t.total() - t.byzantine_bound());
        }
    }

    #[test]
    fn singleton_committee() {
        let t = StakeTable::new(vec![5], 2).unwrap();
        assert_eq!(t.prefix_sums(), vec![5]);
        assert_eq!(t.stake_bits(), 3);
    }
}
