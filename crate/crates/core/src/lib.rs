//! Simulated TPM 2.0 two-phase authenticated key exchange.
//!
//! The crate models the TPM2_EC_Ephemeral / TPM2_ZGen_2Phase command pair and
//! the three key exchange schemes layered on it (unified model ECDH, MQV and
//! SM2), drives complete protocol runs with TPM-backed and software-backed
//! parties, scripts the published attacks against the host-visible variants,
//! and measures the min-entropy of the associated value function that the MQV
//! and SM2 schemes apply to ephemeral points.
//!
//! Module map:
//!
//! - [`group`]: curve backends (P-256, SM2, brute-forceable toy curve, a
//!   fixed-LSB mock) and the associated value function.
//! - [`kdf`]: transcript hashing into session keys and the counter-mode
//!   derivation the TPM uses to regenerate ephemeral scalars.
//! - [`tpm`]: the command-level simulator, original and revised second phase.
//! - [`protocol`]: parties, sessions, activations, scenario scripts.
//! - [`adversary`]: attacker queries, deployment profiles, scripted attacks
//!   and the attack outcome matrix.
//! - [`entropy`]: per-bit min-entropy and context-tree-weighting estimators
//!   with the measurement gates.

pub mod adversary;
pub mod entropy;
pub mod group;
pub mod kdf;
pub mod protocol;
pub mod tpm;
