//! The simulated TPM: a key store, an ephemeral-slot array, and the
//! two-phase key exchange commands.
//!
//! The command surface follows the TPM 2.0 shape. `tpm2_create` and
//! `tpm2_create_primary` make long-term keys whose private scalars never
//! leave the device. `tpm2_ec_ephemeral` hands out an ephemeral public point
//! plus a one-shot slot counter; the private scalar is re-derived from the
//! Random seed and the counter when needed, never stored. The second-phase
//! command combines a long-term key, a slot, and the peer's two points:
//! ECDH yields (B^a, Y^x), MQV yields (Y·B^e)^(h(x+da)) and SM2 yields
//! (B·Y^e)^(h(a+dx)), with d and e the truncated x-coordinates of the own
//! and peer ephemerals. The cofactor power is applied to the base before
//! the mod-q exponent so points outside the prime-order subgroup lose their
//! small component even on curves with h > 1.
//!
//! A `TpmState` runs in one of two modes fixed at construction. `Original`
//! returns the unhashed shared secrets to the host. `Revised` finishes the
//! key derivation internally, takes the two party identities plus the
//! owner's role, and returns only the 256-bit session key.
//!
//! Every command appends one record to a JSONL trace (inputs, public
//! outputs, error code). Private scalars and, in revised mode, the internal
//! Z values are additionally remembered as scan witnesses so the secrecy
//! scanner can check that none of them ever shows up in a response field.
//! A Z witness is scoped to the command that computed it: the value is
//! discarded when that command returns, so only its own response could
//! carry it, and scoping prevents chance collisions between old Z values
//! and unrelated later outputs on small curves from reading as leaks.

use crate::group::{AvfPolicy, Group, GroupElement, GroupError, Scalar};
use crate::kdf::{self, SessionKey, Transcript};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Outstanding (unconsumed) ephemeral slots a TPM will hold at once.
pub const SLOT_CAPACITY: usize = 64;

/// The three key exchange schemes the second-phase command accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ecdh,
    Ecmqv,
    Sm2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ecdh => "ecdh",
            Scheme::Ecmqv => "ecmqv",
            Scheme::Sm2 => "sm2",
        }
    }

    /// The truncation rule the scheme applies to ephemeral x-coordinates;
    /// plain ECDH has none.
    pub fn avf_policy(self) -> Option<AvfPolicy> {
        match self {
            Scheme::Ecdh => None,
            Scheme::Ecmqv => Some(AvfPolicy::Mqv),
            Scheme::Sm2 => Some(AvfPolicy::Sm2),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Scheme, String> {
        match s {
            "ecdh" | "um" => Ok(Scheme::Ecdh),
            "ecmqv" | "mqv" => Ok(Scheme::Ecmqv),
            "sm2" => Ok(Scheme::Sm2),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

/// Whether the second phase returns unhashed Z values or a finished key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpmMode {
    Original,
    Revised,
}

impl TpmMode {
    pub fn name(self) -> &'static str {
        match self {
            TpmMode::Original => "original",
            TpmMode::Revised => "revised",
        }
    }
}

impl std::fmt::Display for TpmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Opaque name for a stored long-term key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyHandle(u64);

impl KeyHandle {
    pub fn raw(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for KeyHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "key:{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TpmError {
    #[error("command scheme {requested} does not match key scheme {bound}")]
    SchemeMismatch { requested: Scheme, bound: Scheme },
    #[error("{which} point is not on the TPM's curve")]
    OffCurvePoint { which: &'static str },
    #[error("ephemeral slot {ctr} is not available")]
    SlotConsumed { ctr: u64 },
    #[error("no key stored under handle {handle}")]
    UnknownHandle { handle: KeyHandle },
    #[error("command requires a {required}-mode TPM, this one is {actual}")]
    ModeMismatch { required: TpmMode, actual: TpmMode },
    #[error("all {capacity} ephemeral slots are outstanding")]
    SlotTableFull { capacity: usize },
    #[error("TPM is bound to curve {bound}, not {requested}")]
    UnknownCurve { requested: String, bound: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

impl TpmError {
    /// Stable code used in trace records and attack reports.
    pub fn code(&self) -> &'static str {
        match self {
            TpmError::SchemeMismatch { .. } => "scheme-mismatch",
            TpmError::OffCurvePoint { .. } => "off-curve-point",
            TpmError::SlotConsumed { .. } => "slot-consumed",
            TpmError::UnknownHandle { .. } => "unknown-handle",
            TpmError::ModeMismatch { .. } => "mode-mismatch",
            TpmError::SlotTableFull { .. } => "slot-table-full",
            TpmError::UnknownCurve { .. } => "unknown-curve",
            TpmError::Group(_) => "group-error",
        }
    }
}

/// One executed command: inputs, public outputs, error code if it failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    pub command: String,
    pub inputs: BTreeMap<String, serde_json::Value>,
    pub outputs: BTreeMap<String, serde_json::Value>,
    pub error: Option<String>,
}

impl TraceRecord {
    fn new(seq: u64, command: &str) -> TraceRecord {
        TraceRecord {
            seq,
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            error: None,
        }
    }

    fn input(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.inputs.insert(key.to_string(), value.into());
    }

    fn output(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.outputs.insert(key.to_string(), value.into());
    }
}

/// A value that must never appear in command output, kept for the scanner.
#[derive(Debug, Clone, Serialize)]
pub struct SecretWitness {
    pub kind: &'static str,
    pub hex: String,
    pub raw_len: usize,
    /// `Some(seq)` when the secret exists only while command `seq` runs
    /// (the revised command's Z values, computed and discarded in place).
    /// Such a value can only leak through that command's own response, and
    /// scoping the scan there keeps chance collisions with unrelated
    /// outputs on small curves from reading as leaks. Long-lived secrets
    /// carry `None` and are scanned against every response.
    pub scope_seq: Option<u64>,
}

/// A witness value found inside a trace record's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeakFinding {
    pub seq: u64,
    pub command: String,
    pub field: String,
    pub kind: &'static str,
}

/// Scans every output field of every record for the witness values. A field
/// leaks a witness if it equals the witness hex, or contains it as a
/// substring when the witness is at least four raw bytes (shorter values
/// collide with honest output by chance on small curves). Witnesses scoped
/// to one command are only compared against that command's record.
pub fn scan_records(records: &[TraceRecord], witnesses: &[SecretWitness]) -> Vec<LeakFinding> {
    let mut findings = Vec::new();
    for record in records {
        for (field, value) in &record.outputs {
            let serde_json::Value::String(s) = value else { continue };
            for witness in witnesses {
                if witness.scope_seq.is_some_and(|scope| scope != record.seq) {
                    continue;
                }
                let hit = s == &witness.hex
                    || (witness.raw_len >= 4 && s.contains(&witness.hex));
                if hit {
                    findings.push(LeakFinding {
                        seq: record.seq,
                        command: record.command.clone(),
                        field: field.clone(),
                        kind: witness.kind,
                    });
                }
            }
        }
    }
    findings
}

/// What the second phase hands back in original mode: ECDH fills both
/// elements, MQV and SM2 only the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZGenOutput {
    pub z1: GroupElement,
    pub z2: Option<GroupElement>,
}

/// A stored long-term key. The private scalar stays inside the module.
#[derive(Debug, Clone)]
struct TpmKeyEntry {
    scheme: Scheme,
    secret: Scalar,
    public: GroupElement,
}

/// One ephemeral slot: the used bit drops from true to false exactly once.
#[derive(Debug, Clone)]
struct EphemeralSlot {
    used: bool,
    public: GroupElement,
}

/// A simulated TPM instance, bound to one curve and one mode for its
/// lifetime. Commands are methods; callers needing shared access wrap the
/// state in [`SharedTpm`].
#[derive(Debug)]
pub struct TpmState {
    group: Group,
    mode: TpmMode,
    primary_seed: [u8; 32],
    random_seed: [u8; 32],
    rng: ChaCha20Rng,
    count: u64,
    derivations: u64,
    next_handle: u64,
    keys: BTreeMap<KeyHandle, TpmKeyEntry>,
    slots: BTreeMap<u64, EphemeralSlot>,
    trace: Vec<TraceRecord>,
    witnesses: Vec<SecretWitness>,
}

impl TpmState {
    /// Builds a TPM whose seeds and key randomness all derive from `seed`.
    pub fn new(group: Group, mode: TpmMode, seed: u64) -> TpmState {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut primary_seed = [0u8; 32];
        let mut random_seed = [0u8; 32];
        rand::RngCore::fill_bytes(&mut rng, &mut primary_seed);
        rand::RngCore::fill_bytes(&mut rng, &mut random_seed);
        TpmState {
            group,
            mode,
            primary_seed,
            random_seed,
            rng,
            count: 0,
            derivations: 0,
            next_handle: 1,
            keys: BTreeMap::new(),
            slots: BTreeMap::new(),
            trace: Vec::new(),
            witnesses: Vec::new(),
        }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn mode(&self) -> TpmMode {
        self.mode
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// The trace as JSON Lines, one command per line.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.trace {
            out.push_str(&serde_json::to_string(record).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    /// Runs the leak scan over this instance's full history.
    pub fn secrecy_scan(&self) -> Vec<LeakFinding> {
        scan_records(&self.trace, &self.witnesses)
    }

    pub fn witness_count(&self) -> usize {
        self.witnesses.len()
    }

    /// Public part of a stored key.
    pub fn public_key(&self, handle: KeyHandle) -> Result<GroupElement, TpmError> {
        Ok(self.entry(handle)?.public.clone())
    }

    pub fn key_scheme(&self, handle: KeyHandle) -> Result<Scheme, TpmError> {
        Ok(self.entry(handle)?.scheme)
    }

    fn entry(&self, handle: KeyHandle) -> Result<&TpmKeyEntry, TpmError> {
        self.keys.get(&handle).ok_or(TpmError::UnknownHandle { handle })
    }

    fn next_seq(&self) -> u64 {
        self.trace.len() as u64
    }

    fn push_witness(&mut self, kind: &'static str, raw: Vec<u8>, scope_seq: Option<u64>) {
        self.witnesses.push(SecretWitness {
            kind,
            hex: hex::encode(&raw),
            raw_len: raw.len(),
            scope_seq,
        });
    }

    fn check_curve(&self, requested: &str) -> Result<(), TpmError> {
        if requested == self.group.name() {
            Ok(())
        } else {
            Err(TpmError::UnknownCurve {
                requested: requested.to_string(),
                bound: self.group.name().to_string(),
            })
        }
    }

    fn store_key(&mut self, scheme: Scheme, secret: Scalar) -> Result<(GroupElement, KeyHandle), TpmError> {
        let public = self.group.exp_generator(&secret)?;
        let handle = KeyHandle(self.next_handle);
        self.next_handle += 1;
        self.push_witness("static-scalar", secret.to_bytes(self.group.scalar_bytes()), None);
        self.keys.insert(handle, TpmKeyEntry { scheme, secret, public: public.clone() });
        Ok((public, handle))
    }

    fn hex_or_tag(&self, el: &GroupElement) -> String {
        self.group
            .encode_hex(el)
            .unwrap_or_else(|_| format!("foreign:{}", el.curve()))
    }

    fn finish<T>(
        &mut self,
        mut record: TraceRecord,
        result: Result<T, TpmError>,
        fill: impl FnOnce(&mut TraceRecord, &T),
    ) -> Result<T, TpmError> {
        match &result {
            Ok(value) => fill(&mut record, value),
            Err(e) => record.error = Some(e.code().to_string()),
        }
        self.trace.push(record);
        result
    }

    /// Creates a long-term key with a fresh random private scalar and
    /// returns its public point and handle.
    pub fn tpm2_create(
        &mut self,
        scheme: Scheme,
        curve: &str,
    ) -> Result<(GroupElement, KeyHandle), TpmError> {
        let mut record = TraceRecord::new(self.next_seq(), "create");
        record.input("scheme", scheme.name());
        record.input("curve", curve);
        let result = self.check_curve(curve).and_then(|()| {
            let secret = self.group.sample_scalar(&mut self.rng);
            self.store_key(scheme, secret)
        });
        let public_hex = result.as_ref().ok().map(|(public, _)| self.hex_or_tag(public));
        self.finish(record, result, |rec, (_, handle)| {
            if let Some(public) = public_hex {
                rec.output("public", public);
            }
            rec.output("handle", handle.raw());
        })
    }

    /// Creates a long-term key whose private scalar is derived from the
    /// primary seed and an internal derivation counter, so the same TPM
    /// instance rebuilt from the same seed yields the same key.
    pub fn tpm2_create_primary(
        &mut self,
        scheme: Scheme,
        curve: &str,
    ) -> Result<(GroupElement, KeyHandle), TpmError> {
        let mut record = TraceRecord::new(self.next_seq(), "create-primary");
        record.input("scheme", scheme.name());
        record.input("curve", curve);
        let result = self.check_curve(curve).and_then(|()| {
            let secret = kdf::kdfa_scalar(&self.group, &self.primary_seed, self.derivations);
            self.derivations += 1;
            self.store_key(scheme, secret)
        });
        let public_hex = result.as_ref().ok().map(|(public, _)| self.hex_or_tag(public));
        self.finish(record, result, |rec, (_, handle)| {
            if let Some(public) = public_hex {
                rec.output("public", public);
            }
            rec.output("handle", handle.raw());
        })
    }

    /// First phase: derives x from (Random seed, Count), marks slot Count
    /// used, increments Count, and returns (g^x, slot counter).
    pub fn tpm2_ec_ephemeral(&mut self) -> Result<(GroupElement, u64), TpmError> {
        let record = TraceRecord::new(self.next_seq(), "ec-ephemeral");
        let result = (|| {
            let outstanding = self.slots.values().filter(|s| s.used).count();
            if outstanding >= SLOT_CAPACITY {
                return Err(TpmError::SlotTableFull { capacity: SLOT_CAPACITY });
            }
            let ctr = self.count;
            let x = kdf::kdfa_scalar(&self.group, &self.random_seed, ctr);
            let public = self.group.exp_generator(&x)?;
            self.push_witness("ephemeral-scalar", x.to_bytes(self.group.scalar_bytes()), None);
            self.slots.insert(ctr, EphemeralSlot { used: true, public: public.clone() });
            self.count += 1;
            Ok((public, ctr))
        })();
        let public_hex = result.as_ref().ok().map(|(public, _)| self.hex_or_tag(public));
        self.finish(record, result, |rec, (_, ctr)| {
            if let Some(public) = public_hex {
                rec.output("ephemeral", public);
            }
            rec.output("ctr", *ctr);
        })
    }

    /// Shared validation and Z computation for both second-phase commands.
    /// Returns (Z1, Z2, own ephemeral public X) and consumes the slot.
    fn zgen_core(
        &mut self,
        scheme: Scheme,
        handle: KeyHandle,
        ctr: u64,
        peer_static: &GroupElement,
        peer_ephemeral: &GroupElement,
    ) -> Result<(GroupElement, Option<GroupElement>, GroupElement), TpmError> {
        let entry = self.entry(handle)?;
        if entry.scheme != scheme {
            return Err(TpmError::SchemeMismatch { requested: scheme, bound: entry.scheme });
        }
        if !self.group.is_on_curve(peer_static) {
            return Err(TpmError::OffCurvePoint { which: "peer-static" });
        }
        if !self.group.is_on_curve(peer_ephemeral) {
            return Err(TpmError::OffCurvePoint { which: "peer-ephemeral" });
        }
        match self.slots.get(&ctr) {
            Some(slot) if slot.used => {}
            _ => return Err(TpmError::SlotConsumed { ctr }),
        }

        let group = &self.group;
        let a = entry.secret.clone();
        let own_ephemeral = self.slots[&ctr].public.clone();
        let x = kdf::kdfa_scalar(group, &self.random_seed, ctr);
        let cofactor = group.scalar_from_u64(group.cofactor());

        let (z1, z2) = match scheme {
            Scheme::Ecdh => {
                let z1 = group.exp(peer_static, &a)?;
                let z2 = group.exp(peer_ephemeral, &x)?;
                (z1, Some(z2))
            }
            Scheme::Ecmqv | Scheme::Sm2 => {
                let policy = scheme.avf_policy().expect("paired scheme");
                let d = group.avf(&own_ephemeral, policy)?;
                let e = group.avf(peer_ephemeral, policy)?;
                let (base, inner) = match scheme {
                    Scheme::Ecmqv => (
                        group.mul(peer_ephemeral, &group.exp(peer_static, &e)?)?,
                        group.scalar_add(&x, &group.scalar_mul(&d, &a)),
                    ),
                    _ => (
                        group.mul(peer_static, &group.exp(peer_ephemeral, &e)?)?,
                        group.scalar_add(&a, &group.scalar_mul(&d, &x)),
                    ),
                };
                let in_subgroup = group.exp(&base, &cofactor)?;
                (group.exp(&in_subgroup, &inner)?, None)
            }
        };

        let slot = self.slots.get_mut(&ctr).expect("slot checked above");
        slot.used = false;
        Ok((z1, z2, own_ephemeral))
    }

    /// Second phase, original command: returns the unhashed shared secrets.
    pub fn tpm2_zgen_2phase(
        &mut self,
        scheme: Scheme,
        handle: KeyHandle,
        ctr: u64,
        peer_static: &GroupElement,
        peer_ephemeral: &GroupElement,
    ) -> Result<ZGenOutput, TpmError> {
        let mut record = TraceRecord::new(self.next_seq(), "zgen-2phase");
        record.input("scheme", scheme.name());
        record.input("handle", handle.raw());
        record.input("ctr", ctr);
        record.input("peer_static", self.hex_or_tag(peer_static));
        record.input("peer_ephemeral", self.hex_or_tag(peer_ephemeral));
        let result = (|| {
            if self.mode != TpmMode::Original {
                return Err(TpmError::ModeMismatch {
                    required: TpmMode::Original,
                    actual: self.mode,
                });
            }
            let (z1, z2, _) = self.zgen_core(scheme, handle, ctr, peer_static, peer_ephemeral)?;
            Ok(ZGenOutput { z1, z2 })
        })();
        let z1_hex = result.as_ref().ok().map(|out| self.hex_or_tag(&out.z1));
        let z2_hex = result
            .as_ref()
            .ok()
            .and_then(|out| out.z2.as_ref())
            .map(|z2| self.hex_or_tag(z2));
        self.finish(record, result, |rec, _| {
            if let Some(z1) = z1_hex {
                rec.output("z1", z1);
            }
            if let Some(z2) = z2_hex {
                rec.output("z2", z2);
            }
        })
    }

    /// Second phase, revised command: hashes the shared secrets with the
    /// party identities inside the TPM and returns only the session key.
    /// `owner_initiated` says which side of the exchange this TPM's owner
    /// played, so both parties hash the same initiator-first transcript.
    #[allow(clippy::too_many_arguments)]
    pub fn tpm2_zgen_2phase_rev(
        &mut self,
        scheme: Scheme,
        handle: KeyHandle,
        ctr: u64,
        peer_static: &GroupElement,
        peer_ephemeral: &GroupElement,
        id_owner: &str,
        id_peer: &str,
        owner_initiated: bool,
    ) -> Result<SessionKey, TpmError> {
        let mut record = TraceRecord::new(self.next_seq(), "zgen-2phase-rev");
        record.input("scheme", scheme.name());
        record.input("handle", handle.raw());
        record.input("ctr", ctr);
        record.input("peer_static", self.hex_or_tag(peer_static));
        record.input("peer_ephemeral", self.hex_or_tag(peer_ephemeral));
        record.input("id_owner", id_owner);
        record.input("id_peer", id_peer);
        record.input("owner_initiated", owner_initiated);
        let result = (|| {
            if self.mode != TpmMode::Revised {
                return Err(TpmError::ModeMismatch {
                    required: TpmMode::Revised,
                    actual: self.mode,
                });
            }
            let (z1, z2, own_ephemeral) =
                self.zgen_core(scheme, handle, ctr, peer_static, peer_ephemeral)?;
            let seq = self.next_seq();
            let encoded_z1 = self.group.encode(&z1)?;
            self.push_witness("shared-z", encoded_z1, Some(seq));
            if let Some(z2) = &z2 {
                self.push_witness("shared-z", self.group.encode(z2)?, Some(seq));
            }
            let (initiator, responder) = if owner_initiated {
                (id_owner.to_string(), id_peer.to_string())
            } else {
                (id_peer.to_string(), id_owner.to_string())
            };
            let transcript = match scheme {
                Scheme::Ecdh => {
                    let z2 = z2.expect("ecdh always fills z2");
                    let (initiator_ephemeral, responder_ephemeral) = if owner_initiated {
                        (own_ephemeral, peer_ephemeral.clone())
                    } else {
                        (peer_ephemeral.clone(), own_ephemeral)
                    };
                    Transcript::Um {
                        z1,
                        z2,
                        initiator,
                        responder,
                        initiator_ephemeral,
                        responder_ephemeral,
                    }
                }
                Scheme::Ecmqv | Scheme::Sm2 => Transcript::Paired { z: z1, initiator, responder },
            };
            let key = match &transcript {
                Transcript::Um { .. } => kdf::h1(&self.group, &transcript),
                Transcript::Paired { .. } => kdf::h2(&self.group, &transcript),
            }
            .map_err(|e| match e {
                kdf::KdfError::Group(g) => TpmError::Group(g),
                kdf::KdfError::WrongVariant { .. } => unreachable!("variant chosen above"),
            })?;
            Ok(key)
        })();
        self.finish(record, result, |rec, key| {
            rec.output("session_key", key.to_hex());
        })
    }
}

#[cfg(test)]
impl TpmState {
    pub(crate) fn secret_of(&self, handle: KeyHandle) -> Scalar {
        self.keys[&handle].secret.clone()
    }

    pub(crate) fn random_seed_bytes(&self) -> [u8; 32] {
        self.random_seed
    }
}

/// Serializes command access to one TPM from multiple owners.
#[derive(Debug, Clone)]
pub struct SharedTpm(Arc<Mutex<TpmState>>);

impl SharedTpm {
    pub fn new(state: TpmState) -> SharedTpm {
        SharedTpm(Arc::new(Mutex::new(state)))
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut TpmState) -> T) -> T {
        let mut guard = self.0.lock().expect("tpm lock poisoned");
        f(&mut guard)
    }
}
