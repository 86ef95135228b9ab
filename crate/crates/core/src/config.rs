//! Width parameters shared by the circuit layer and the protocol.

use crate::stake::StakeTable;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("draw width beta_x = {0} out of range; need 4..=64 bits")]
    BetaXOutOfRange(u32),
    #[error("stake width beta_m = {beta_m} must be strictly below draw width beta_x = {beta_x}")]
    StakeWidthTooLarge { beta_m: u32, beta_x: u32 },
    #[error("digest width lambda = {0} out of range; need a multiple of 8 in 8..=256 bits")]
    LambdaInvalid(u32),
}

/// Width configuration for all circuit evaluations in one protocol instance.
///
/// * `beta_x`: bit width of a random draw; the draw domain size is `delta = 2^beta_x`.
/// * `beta_m`: bit width of the largest stake sum the instance can produce.
///   Must stay strictly below `beta_x` so scaled draws keep their accuracy.
/// * `lambda`: digest width in bits for proofs and vouchers.
/// * `beta_cost`: modeled ciphertext expansion (bits on the wire per plaintext
///   bit); only communication accounting reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub beta_x: u32,
    pub beta_m: u32,
    pub lambda: u32,
    pub beta_cost: u32,
}

pub const DEFAULT_BETA_X: u32 = 64;
pub const DEFAULT_LAMBDA: u32 = 256;

impl CircuitConfig {
    pub fn new(beta_x: u32, beta_m: u32, lambda: u32, beta_cost: u32) -> Result<Self, ConfigError> {
        if !(4..=64).contains(&beta_x) {
            return Err(ConfigError::BetaXOutOfRange(beta_x));
        }
        if beta_m >= beta_x {
            return Err(ConfigError::StakeWidthTooLarge { beta_m, beta_x });
        }
        if lambda == 0 || lambda > 256 || lambda % 8 != 0 {
            return Err(ConfigError::LambdaInvalid(lambda));
        }
        Ok(Self {
            beta_x,
            beta_m,
            lambda,
            beta_cost,
        })
    }

    /// Configuration for a concrete committee: `beta_m` is taken from the
    /// committee's total stake, `beta_cost` defaults to `lambda` (binary
    /// circuits encrypt each bit into a lambda-bit ciphertext).
    pub fn for_table(
        beta_x: u32,
        lambda: u32,
        table: &StakeTable,
    ) -> Result<Self, ConfigError> {
        Self::new(beta_x, table.stake_bits(), lambda, lambda)
    }

    /// Size of the draw domain, `2^beta_x`. Held as u128 because the default
    /// width is the full 64-bit word.
    pub fn delta(&self) -> u128 {
        1u128 << self.beta_x
    }

    pub fn word_in_range(&self, w: u64) -> bool {
        (w as u128) < self.delta()
    }

    pub fn lambda_bytes(&self) -> usize {
        (self.lambda / 8) as usize
    }
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            beta_x: DEFAULT_BETA_X,
            beta_m: 20,
            lambda: DEFAULT_LAMBDA,
            beta_cost: DEFAULT_LAMBDA,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_validate() {
        assert!(CircuitConfig::new(64, 20, 256, 256).is_ok());
        assert!(CircuitConfig::new(4, 3, 16, 16).is_ok());
        assert_eq!(
            CircuitConfig::new(3, 2, 16, 16),
            Err(ConfigError::BetaXOutOfRange(3))
        );
        assert_eq!(
            CircuitConfig::new(8, 8, 16, 16),
            Err(ConfigError::StakeWidthTooLarge { beta_m: 8, beta_x: 8 })
        );
        assert_eq!(
            CircuitConfig::new(8, 3, 12, 16),
            Err(ConfigError::LambdaInvalid(12))
        );
    }

    #[test]
    fn table_derived_config() {
        let t = StakeTable::new(vec![3, 1, 2], 2).unwrap();
        let c = CircuitConfig::for_table(4, 16, &t).unwrap();
        assert_eq!(c.beta_m, 3);
        assert_eq!(c.delta(), 16);
        assert!(c.word_in_range(15));
        assert!(!c.word_in_range(16));
    }

    #[test]
    fn full_width_domain() {
        let c = CircuitConfig::default();
        assert_eq!(c.delta(), 1u128 << 64);
        assert!(c.word_in_range(u64::MAX));
    }
}
