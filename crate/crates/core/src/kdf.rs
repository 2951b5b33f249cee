//! Session key derivation and the TPM's deterministic ephemeral-scalar
//! derivation.
//!
//! Session keys are 256 bits. The unified-model scheme hashes the tuple
//! (Z1, Z2, initiator id, responder id, initiator ephemeral, responder
//! ephemeral); MQV and SM2 hash (Z, initiator id, responder id). Both go
//! through one canonical byte encoding: a domain-separation tag byte
//! followed by every field length-prefixed (u32 big-endian), group elements
//! in their fixed-width uncompressed encoding, identities as raw UTF-8.
//! Either side of an exchange can produce the same encoding because both
//! know who opened it; the responder swaps its own view into initiator-first
//! order before hashing.
//!
//! Ephemeral scalars are regenerated rather than stored: counter-mode
//! HMAC-SHA256 keyed by the TPM's random seed, label `tpmke-ephem`, with the
//! slot counter as context, oversampled 64 bits past the order width and
//! reduced mod q. A zero residue re-derives with an inner retry counter so
//! the (astronomically rare, but reachable on the toy curve) degenerate case
//! stays deterministic.

use crate::group::{Group, GroupElement, GroupError, Scalar};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SESSION_KEY_BYTES: usize = 32;

const TAG_UM: u8 = 0x01;
const TAG_PAIRED: u8 = 0x02;
const KDFA_LABEL: &[u8] = b"tpmke-ephem";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KdfError {
    #[error("expected the {expected} transcript variant, got {got}")]
    WrongVariant { expected: &'static str, got: &'static str },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A derived 256-bit session key.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SessionKey([u8; SESSION_KEY_BYTES]);

impl SessionKey {
    pub fn from_bytes(bytes: [u8; SESSION_KEY_BYTES]) -> SessionKey {
        SessionKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SESSION_KEY_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SessionKey({})", self.to_hex())
    }
}

/// The hashed view of one completed exchange, already rotated into
/// initiator-first order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transcript {
    Um {
        z1: GroupElement,
        z2: GroupElement,
        initiator: String,
        responder: String,
        initiator_ephemeral: GroupElement,
        responder_ephemeral: GroupElement,
    },
    Paired {
        z: GroupElement,
        initiator: String,
        responder: String,
    },
}

impl Transcript {
    fn variant_name(&self) -> &'static str {
        match self {
            Transcript::Um { .. } => "um",
            Transcript::Paired { .. } => "paired",
        }
    }
}

fn push_field(out: &mut Vec<u8>, field: &[u8]) {
    out.extend_from_slice(&u32::try_from(field.len()).expect("field length").to_be_bytes());
    out.extend_from_slice(field);
}

/// Canonical byte encoding of a transcript. Injective for a fixed group:
/// every field carries its own length and elements have fixed width.
pub fn encode_transcript(group: &Group, t: &Transcript) -> Result<Vec<u8>, KdfError> {
    let mut out = Vec::new();
    match t {
        Transcript::Um { z1, z2, initiator, responder, initiator_ephemeral, responder_ephemeral } => {
            out.push(TAG_UM);
            push_field(&mut out, &group.encode(z1)?);
            push_field(&mut out, &group.encode(z2)?);
            push_field(&mut out, initiator.as_bytes());
            push_field(&mut out, responder.as_bytes());
            push_field(&mut out, &group.encode(initiator_ephemeral)?);
            push_field(&mut out, &group.encode(responder_ephemeral)?);
        }
        Transcript::Paired { z, initiator, responder } => {
            out.push(TAG_PAIRED);
            push_field(&mut out, &group.encode(z)?);
            push_field(&mut out, initiator.as_bytes());
            push_field(&mut out, responder.as_bytes());
        }
    }
    Ok(out)
}

fn digest_transcript(group: &Group, t: &Transcript) -> Result<SessionKey, KdfError> {
    let bytes = encode_transcript(group, t)?;
    let digest = Sha256::digest(&bytes);
    Ok(SessionKey(digest.into()))
}

/// Unified-model session key.
pub fn h1(group: &Group, t: &Transcript) -> Result<SessionKey, KdfError> {
    match t {
        Transcript::Um { .. } => digest_transcript(group, t),
        other => Err(KdfError::WrongVariant { expected: "um", got: other.variant_name() }),
    }
}

/// MQV / SM2 session key.
pub fn h2(group: &Group, t: &Transcript) -> Result<SessionKey, KdfError> {
    match t {
        Transcript::Paired { .. } => digest_transcript(group, t),
        other => Err(KdfError::WrongVariant { expected: "paired", got: other.variant_name() }),
    }
}

type HmacSha256 = Hmac<Sha256>;

/// Counter-mode KDF (HMAC-SHA256): block i is
/// HMAC(seed, BE32(i) || label || 0x00 || context || BE32(bits)).
/// Output truncated to `bits`, excess high bits of the first octet masked.
pub fn kdfa_bytes(seed: &[u8], label: &[u8], context: &[u8], bits: u64) -> Vec<u8> {
    let out_len = usize::try_from((bits + 7) / 8).expect("kdfa output length");
    let mut out = Vec::with_capacity(out_len);
    let mut block: u32 = 1;
    while out.len() < out_len {
        let mut mac = HmacSha256::new_from_slice(seed).expect("hmac accepts any key length");
        mac.update(&block.to_be_bytes());
        mac.update(label);
        mac.update(&[0u8]);
        mac.update(context);
        mac.update(&u32::try_from(bits).expect("bit count").to_be_bytes());
        out.extend_from_slice(&mac.finalize().into_bytes());
        block += 1;
    }
    out.truncate(out_len);
    if bits % 8 != 0 {
        out[0] &= 0xffu8 >> (8 - bits % 8);
    }
    out
}

/// Deterministic ephemeral scalar for a (seed, counter) pair: nonzero mod q.
pub fn kdfa_scalar(group: &Group, seed: &[u8], count: u64) -> Scalar {
    let bits = group.order().bits() + 64;
    for retry in 0u32.. {
        let mut context = count.to_be_bytes().to_vec();
        context.extend_from_slice(&retry.to_be_bytes());
        let bytes = kdfa_bytes(seed, KDFA_LABEL, &context, bits);
        let s = group.scalar_from_bytes_be(&bytes);
        if !s.is_zero() {
            return s;
        }
    }
    unreachable!("some retry yields a nonzero residue")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Deserialize)]
    struct Fixture {
        h1: Vec<UmVector>,
        h2: Vec<PairedVector>,
        kdfa: Vec<KdfaVector>,
    }

    #[derive(Deserialize)]
    struct UmVector {
        desc: String,
        curve: String,
        z1: String,
        z2: String,
        initiator: String,
        responder: String,
        initiator_ephemeral: String,
        responder_ephemeral: String,
        key: String,
    }

    #[derive(Deserialize)]
    struct PairedVector {
        desc: String,
        curve: String,
        z: String,
        initiator: String,
        responder: String,
        key: String,
    }

    #[derive(Deserialize)]
    struct KdfaVector {
        desc: String,
        curve: String,
        seed: String,
        count: u64,
        scalar: String,
    }

    fn fixture() -> Fixture {
        serde_json::from_str(include_str!("../tests/fixtures/kdf_vectors.json"))
            .expect("fixture parses")
    }

    fn group_for(curve: &str) -> Group {
        Group::by_name(curve).expect("fixture curve")
    }

    #[test]
    fn um_vectors() {
        for v in fixture().h1 {
            let group = group_for(&v.curve);
            let t = Transcript::Um {
                z1: group.decode_hex(&v.z1).unwrap(),
                z2: group.decode_hex(&v.z2).unwrap(),
                initiator: v.initiator,
                responder: v.responder,
                initiator_ephemeral: group.decode_hex(&v.initiator_ephemeral).unwrap(),
                responder_ephemeral: group.decode_hex(&v.responder_ephemeral).unwrap(),
            };
            assert_eq!(h1(&group, &t).unwrap().to_hex(), v.key, "{}", v.desc);
        }
    }

    #[test]
    fn paired_vectors() {
        for v in fixture().h2 {
            let group = group_for(&v.curve);
            let t = Transcript::Paired {
                z: group.decode_hex(&v.z).unwrap(),
                initiator: v.initiator,
                responder: v.responder,
            };
            assert_eq!(h2(&group, &t).unwrap().to_hex(), v.key, "{}", v.desc);
        }
    }

    #[test]
    fn kdfa_vectors() {
        for v in fixture().kdfa {
            let group = group_for(&v.curve);
            let seed = hex::decode(&v.seed).unwrap();
            let s = kdfa_scalar(&group, &seed, v.count);
            assert_eq!(s.value().to_str_radix(16), v.scalar, "{}", v.desc);
        }
    }

    fn sample_um(group: &Group) -> Transcript {
        Transcript::Um {
            z1: group.exp_generator(&group.scalar_from_u64(48)).unwrap(),
            z2: group.exp_generator(&group.scalar_from_u64(63)).unwrap(),
            initiator: "alice".into(),
            responder: "bob".into(),
            initiator_ephemeral: group.exp_generator(&group.scalar_from_u64(7)).unwrap(),
            responder_ephemeral: group.exp_generator(&group.scalar_from_u64(9)).unwrap(),
        }
    }

    fn sample_paired(group: &Group) -> Transcript {
        Transcript::Paired {
            z: group.exp_generator(&group.scalar_from_u64(17)).unwrap(),
            initiator: "alice".into(),
            responder: "bob".into(),
        }
    }

    #[test]
    fn variant_mismatch_is_an_error() {
        let group = Group::toy();
        let um = sample_um(&group);
        let paired = sample_paired(&group);
        assert_eq!(
            h1(&group, &paired),
            Err(KdfError::WrongVariant { expected: "um", got: "paired" })
        );
        assert_eq!(
            h2(&group, &um),
            Err(KdfError::WrongVariant { expected: "paired", got: "um" })
        );
    }

    #[test]
    fn every_um_field_feeds_the_key() {
        let group = Group::toy();
        let base = sample_um(&group);
        let key = h1(&group, &base).unwrap();
        let other = group.exp_generator(&group.scalar_from_u64(40)).unwrap();

        let mut variants = Vec::new();
        for i in 0..6 {
            let mut t = base.clone();
            if let Transcript::Um {
                z1,
                z2,
                initiator,
                responder,
                initiator_ephemeral,
                responder_ephemeral,
            } = &mut t
            {
                match i {
                    0 => *z1 = other.clone(),
                    1 => *z2 = other.clone(),
                    2 => *initiator = "mallory".into(),
                    3 => *responder = "mallory".into(),
                    4 => *initiator_ephemeral = other.clone(),
                    _ => *responder_ephemeral = other.clone(),
                }
            }
            variants.push(h1(&group, &t).unwrap());
        }
        for (i, variant) in variants.iter().enumerate() {
            assert_ne!(variant, &key, "field {i} did not affect the key");
        }
    }

    #[test]
    fn identity_order_is_positional() {
        let group = Group::toy();
        let forward = sample_paired(&group);
        let swapped = Transcript::Paired {
            z: group.exp_generator(&group.scalar_from_u64(17)).unwrap(),
            initiator: "bob".into(),
            responder: "alice".into(),
        };
        assert_ne!(h2(&group, &forward).unwrap(), h2(&group, &swapped).unwrap());
    }

    #[test]
    fn field_framing_resists_boundary_shifts() {
        let group = Group::toy();
        let z = group.exp_generator(&group.scalar_from_u64(17)).unwrap();
        let a = Transcript::Paired { z: z.clone(), initiator: "ab".into(), responder: "c".into() };
        let b = Transcript::Paired { z, initiator: "a".into(), responder: "bc".into() };
        assert_ne!(h2(&group, &a).unwrap(), h2(&group, &b).unwrap());
    }

    #[test]
    fn mixed_curve_elements_are_rejected() {
        let toy = Group::toy();
        let p256 = Group::p256();
        let mut t = sample_paired(&toy);
        if let Transcript::Paired { z, .. } = &mut t {
            *z = p256.generator();
        }
        assert!(matches!(h2(&toy, &t), Err(KdfError::Group(GroupError::MixedCurve { .. }))));
    }

    #[test]
    fn kdfa_is_deterministic_and_count_sensitive() {
        let group = Group::toy();
        let seed = [0x5au8; 32];
        let first = kdfa_scalar(&group, &seed, 3);
        assert_eq!(first, kdfa_scalar(&group, &seed, 3));
        assert_ne!(first, kdfa_scalar(&group, &seed, 4));
        assert_ne!(first, kdfa_scalar(&group, &[0xa5u8; 32], 3));
    }

    #[test]
    fn kdfa_scalars_stay_in_range() {
        let group = Group::toy();
        let seed = [0x33u8; 32];
        for count in 0..200 {
            let s = kdfa_scalar(&group, &seed, count);
            assert!(!s.is_zero());
            assert!(s.value() < group.order());
        }
    }

    #[test]
    fn kdfa_bytes_masks_partial_leading_octet() {
        let out = kdfa_bytes(b"seed", b"label", b"ctx", 12);
        assert_eq!(out.len(), 2);
        assert!(out[0] <= 0x0f);
        let full = kdfa_bytes(b"seed", b"label", b"ctx", 512);
        assert_eq!(full.len(), 64);
    }
}
