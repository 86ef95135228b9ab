//! Stake-weighted secret leader election and secret leader permutation over
//! an emulated threshold-FHE layer, with a deterministic adversarial network
//! simulator for checking protocol properties and complexity claims.

pub mod circuits;
pub mod config;
pub mod encdom;
pub mod setup;
pub mod sortition;
pub mod stake;

pub use config::CircuitConfig;
pub use encdom::{CipherHandle, DecryptionShare, EncDomain, KeyMaterial, KeyShare};
pub use stake::StakeTable;
