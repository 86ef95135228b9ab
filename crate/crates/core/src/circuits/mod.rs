//! The circuit suite evaluated inside the encryption domain.
//!
//! [`reference`] holds the plaintext semantics of each circuit and is the
//! single source of truth for what evaluation computes. [`cost`] holds the
//! binary-gate cost model and multiplicative depth accounting used for the
//! complexity reports. Evaluation itself lives on
//! [`EncDomain::eval`](crate::encdom::EncDomain::eval), which pairs these
//! semantics with handle provenance and gate charging.

pub mod cost;
pub mod reference;
