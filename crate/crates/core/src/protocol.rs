//! Host-side protocol drivers: parties, sessions, and the three activation
//! operations (initiate, respond, complete) over a shared environment.
//!
//! A party is backed one of three ways. `TpmOriginal` keeps its long-term
//! key in a TPM whose second phase returns unhashed shared secrets, so the
//! host performs the final hash. `TpmRevised` keeps the key in a TPM that
//! derives the session key internally. `Software` holds a raw scalar in
//! host memory and runs the whole computation there. All three speak the
//! same wire format (group elements), so any backing pair can interoperate
//! as long as the scheme matches.
//!
//! Sessions are identified by the quintuple (scheme, owner, peer, outbound
//! point, inbound point); two sessions match when one's quintuple is the
//! other's with the party and point pairs mirrored, and message-match when
//! the transcripts mirror but the schemes differ.
//!
//! Each completed session carries the state an attacker would obtain by
//! revealing it, which depends on the backing: original-mode TPM sessions
//! expose the unhashed Z for MQV and SM2 but only the key for UM (the host
//! hashes and discards there), revised-mode TPM sessions expose only the
//! key, and software sessions expose the key, every shared secret, and the
//! ephemeral scalar.

use crate::group::{Group, GroupElement, GroupError, Scalar};
use crate::kdf::{self, KdfError, SessionKey, Transcript};
use crate::tpm::{KeyHandle, LeakFinding, Scheme, TpmError, TpmMode, TpmState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Where a party's long-term key lives and who finishes the key derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backing {
    TpmOriginal,
    TpmRevised,
    Software,
}

impl Backing {
    pub fn name(self) -> &'static str {
        match self {
            Backing::TpmOriginal => "tpm-original",
            Backing::TpmRevised => "tpm-revised",
            Backing::Software => "software",
        }
    }
}

impl std::fmt::Display for Backing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backing {
    type Err = String;

    fn from_str(s: &str) -> Result<Backing, String> {
        match s {
            "tpm-original" => Ok(Backing::TpmOriginal),
            "tpm-revised" => Ok(Backing::TpmRevised),
            "software" => Ok(Backing::Software),
            other => Err(format!("unknown backing {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no party registered as {id:?}")]
    UnknownParty { id: String },
    #[error("party {id:?} already registered")]
    DuplicateParty { id: String },
    #[error("party {id:?} runs {bound}, activation asked for {requested}")]
    SchemeMismatch { id: String, bound: Scheme, requested: Scheme },
    #[error("{which} point is not on the environment's curve")]
    OffCurve { which: &'static str },
    #[error("{owner:?} has no open {scheme} session with {peer:?} and that outbound point")]
    NoOpenSession { scheme: Scheme, owner: String, peer: String },
    #[error("key import needs a software party, {id:?} is {backing}")]
    KeyImportNeedsSoftware { id: String, backing: Backing },
    #[error("party {id:?} is not TPM-backed")]
    NotTpmBacked { id: String },
    #[error("party {id:?} holds no private key and cannot run activations")]
    NoPrivateKey { id: String },
    #[error("scenario step references unknown label {label:?}")]
    UnknownLabel { label: String },
    #[error(transparent)]
    Tpm(#[from] TpmError),
    #[error(transparent)]
    Kdf(#[from] KdfError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Long-term key material, shaped by the backing. `External` is a public
/// key registered without proof of possession; such a party can be named
/// as a peer but cannot run activations itself.
#[derive(Debug)]
enum KeyMaterial {
    Tpm { tpm: TpmState, handle: KeyHandle, public: GroupElement },
    Software { secret: Scalar, public: GroupElement },
    External { public: GroupElement },
}

/// A registered protocol participant.
#[derive(Debug)]
pub struct Party {
    id: String,
    backing: Backing,
    scheme: Scheme,
    corrupted: bool,
    keys: KeyMaterial,
}

impl Party {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn backing(&self) -> Backing {
        self.backing
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn corrupted(&self) -> bool {
        self.corrupted
    }

    pub fn public_key(&self) -> GroupElement {
        match &self.keys {
            KeyMaterial::Tpm { public, .. }
            | KeyMaterial::Software { public, .. }
            | KeyMaterial::External { public } => public.clone(),
        }
    }
}

/// What corrupting a party hands the attacker: software keys come out in
/// the clear, TPM keys only as the right to run commands.
#[derive(Debug, Clone)]
pub enum CorruptionYield {
    SoftwareSecret(Scalar),
    TpmBlackBox,
    NoMaterial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    Open,
    Completed,
}

impl SessionState {
    pub fn name(self) -> &'static str {
        match self {
            SessionState::Open => "open",
            SessionState::Completed => "completed",
        }
    }
}

/// How the session's ephemeral secret is held between activation and
/// completion.
#[derive(Debug, Clone)]
enum EphemeralRef {
    SlotCtr(u64),
    HostScalar(Scalar),
}

/// Everything a session-state reveal returns for this session.
#[derive(Debug, Clone, Default)]
pub struct RevealableState {
    pub session_key: Option<SessionKey>,
    pub shared_secrets: Vec<GroupElement>,
    pub ephemeral_scalar: Option<Scalar>,
}

/// One session: the quintuple identifier plus driver bookkeeping.
#[derive(Debug)]
pub struct SessionRecord {
    scheme: Scheme,
    owner: String,
    peer: String,
    out: GroupElement,
    inbound: Option<GroupElement>,
    role: Role,
    state: SessionState,
    ephemeral: EphemeralRef,
    key: Option<SessionKey>,
    revealable: RevealableState,
}

impl SessionRecord {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn out(&self) -> &GroupElement {
        &self.out
    }

    pub fn inbound(&self) -> Option<&GroupElement> {
        self.inbound.as_ref()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn key(&self) -> Option<&SessionKey> {
        self.key.as_ref()
    }

    pub fn revealable(&self) -> &RevealableState {
        &self.revealable
    }
}

/// True when `b` is `a` seen from the other side: same scheme, parties
/// swapped, inbound and outbound points swapped.
pub fn matching(a: &SessionRecord, b: &SessionRecord) -> bool {
    a.scheme == b.scheme && mirrored(a, b)
}

/// True when the transcripts mirror but the schemes differ.
pub fn message_matching(a: &SessionRecord, b: &SessionRecord) -> bool {
    a.scheme != b.scheme && mirrored(a, b)
}

fn mirrored(a: &SessionRecord, b: &SessionRecord) -> bool {
    a.owner == b.peer
        && a.peer == b.owner
        && Some(&a.out) == b.inbound.as_ref()
        && a.inbound.as_ref() == Some(&b.out)
}

/// Stable reference to a session in one environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SessionId(usize);

impl SessionId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The shared-secret computation a software party runs for MQV or SM2,
/// also used by attack code that plays a party by hand. The caller passes
/// its own scalars and the peer's two public points; the cofactor power is
/// applied before the mod-q exponent exactly like the TPM does.
pub fn paired_shared_secret(
    group: &Group,
    scheme: Scheme,
    own_static: &Scalar,
    own_ephemeral: &Scalar,
    own_ephemeral_public: &GroupElement,
    peer_static: &GroupElement,
    peer_ephemeral: &GroupElement,
) -> Result<GroupElement, ProtocolError> {
    let policy = scheme.avf_policy().ok_or(ProtocolError::SchemeMismatch {
        id: "paired-shared-secret".into(),
        bound: Scheme::Ecdh,
        requested: scheme,
    })?;
    let d = group.avf(own_ephemeral_public, policy)?;
    let e = group.avf(peer_ephemeral, policy)?;
    let (base, inner) = match scheme {
        Scheme::Ecmqv => (
            group.mul(peer_ephemeral, &group.exp(peer_static, &e)?)?,
            group.scalar_add(own_ephemeral, &group.scalar_mul(&d, own_static)),
        ),
        _ => (
            group.mul(peer_static, &group.exp(peer_ephemeral, &e)?)?,
            group.scalar_add(own_static, &group.scalar_mul(&d, own_ephemeral)),
        ),
    };
    let in_subgroup = group.exp(&base, &group.scalar_from_u64(group.cofactor()))?;
    Ok(group.exp(&in_subgroup, &inner)?)
}

/// Party registry, session table, and the activation operations.
#[derive(Debug)]
pub struct Environment {
    group: Group,
    rng: ChaCha20Rng,
    parties: BTreeMap<String, Party>,
    sessions: Vec<SessionRecord>,
}

impl Environment {
    pub fn new(group: Group, seed: u64) -> Environment {
        Environment {
            group,
            rng: ChaCha20Rng::seed_from_u64(seed),
            parties: BTreeMap::new(),
            sessions: Vec::new(),
        }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn party(&self, id: &str) -> Result<&Party, ProtocolError> {
        self.parties.get(id).ok_or_else(|| ProtocolError::UnknownParty { id: id.to_string() })
    }

    pub fn party_ids(&self) -> impl Iterator<Item = &str> {
        self.parties.keys().map(String::as_str)
    }

    pub fn session(&self, id: SessionId) -> &SessionRecord {
        &self.sessions[id.0]
    }

    pub fn sessions(&self) -> impl Iterator<Item = (SessionId, &SessionRecord)> {
        self.sessions.iter().enumerate().map(|(i, s)| (SessionId(i), s))
    }

    /// Registers a party with fresh key material appropriate to the backing.
    pub fn register_party(
        &mut self,
        id: &str,
        backing: Backing,
        scheme: Scheme,
    ) -> Result<GroupElement, ProtocolError> {
        if self.parties.contains_key(id) {
            return Err(ProtocolError::DuplicateParty { id: id.to_string() });
        }
        let keys = match backing {
            Backing::Software => {
                let secret = self.group.sample_scalar(&mut self.rng);
                let public = self.group.exp_generator(&secret)?;
                KeyMaterial::Software { secret, public }
            }
            Backing::TpmOriginal | Backing::TpmRevised => {
                let mode = match backing {
                    Backing::TpmOriginal => TpmMode::Original,
                    _ => TpmMode::Revised,
                };
                let mut tpm = TpmState::new(self.group.clone(), mode, self.rng.gen());
                let (public, handle) = tpm.tpm2_create(scheme, self.group.name())?;
                KeyMaterial::Tpm { tpm, handle, public }
            }
        };
        let public = match &keys {
            KeyMaterial::Tpm { public, .. }
            | KeyMaterial::Software { public, .. }
            | KeyMaterial::External { public } => public.clone(),
        };
        self.parties.insert(
            id.to_string(),
            Party { id: id.to_string(), backing, scheme, corrupted: false, keys },
        );
        Ok(public)
    }

    /// Registers a software party under a caller-chosen private scalar.
    /// TPM backings cannot import keys, so there is no equivalent for them.
    pub fn register_party_with_secret(
        &mut self,
        id: &str,
        scheme: Scheme,
        secret: Scalar,
    ) -> Result<GroupElement, ProtocolError> {
        if self.parties.contains_key(id) {
            return Err(ProtocolError::DuplicateParty { id: id.to_string() });
        }
        let public = self.group.exp_generator(&secret)?;
        self.parties.insert(
            id.to_string(),
            Party {
                id: id.to_string(),
                backing: Backing::Software,
                scheme,
                corrupted: false,
                keys: KeyMaterial::Software { secret, public: public.clone() },
            },
        );
        Ok(public)
    }

    /// Registers a party under a bare public key, with no proof that anyone
    /// holds the matching private scalar. The point must lie on the curve;
    /// the party starts out marked corrupted since no honest holder exists.
    pub fn register_party_external(
        &mut self,
        id: &str,
        scheme: Scheme,
        public: GroupElement,
    ) -> Result<(), ProtocolError> {
        if self.parties.contains_key(id) {
            return Err(ProtocolError::DuplicateParty { id: id.to_string() });
        }
        if !self.group.is_on_curve(&public) {
            return Err(ProtocolError::OffCurve { which: "registered public key" });
        }
        self.parties.insert(
            id.to_string(),
            Party {
                id: id.to_string(),
                backing: Backing::Software,
                scheme,
                corrupted: true,
                keys: KeyMaterial::External { public },
            },
        );
        Ok(())
    }

    /// Marks the party corrupted and returns what the attacker now holds.
    pub fn corrupt_party(&mut self, id: &str) -> Result<CorruptionYield, ProtocolError> {
        let party = self
            .parties
            .get_mut(id)
            .ok_or_else(|| ProtocolError::UnknownParty { id: id.to_string() })?;
        party.corrupted = true;
        Ok(match &party.keys {
            KeyMaterial::Software { secret, .. } => CorruptionYield::SoftwareSecret(secret.clone()),
            KeyMaterial::Tpm { .. } => CorruptionYield::TpmBlackBox,
            KeyMaterial::External { .. } => CorruptionYield::NoMaterial,
        })
    }

    /// Black-box command access to a TPM-backed party's TPM.
    pub fn with_party_tpm<T>(
        &mut self,
        id: &str,
        f: impl FnOnce(&mut TpmState) -> T,
    ) -> Result<T, ProtocolError> {
        let party = self
            .parties
            .get_mut(id)
            .ok_or_else(|| ProtocolError::UnknownParty { id: id.to_string() })?;
        match &mut party.keys {
            KeyMaterial::Tpm { tpm, .. } => Ok(f(tpm)),
            _ => Err(ProtocolError::NotTpmBacked { id: id.to_string() }),
        }
    }

    /// The TPM key handle a TPM-backed party uses.
    pub fn party_key_handle(&self, id: &str) -> Result<KeyHandle, ProtocolError> {
        match &self.party(id)?.keys {
            KeyMaterial::Tpm { handle, .. } => Ok(*handle),
            _ => Err(ProtocolError::NotTpmBacked { id: id.to_string() }),
        }
    }

    /// Runs the leak scanner over every TPM in the environment.
    pub fn scan_all_tpms(&self) -> Vec<(String, LeakFinding)> {
        let mut findings = Vec::new();
        for (id, party) in &self.parties {
            if let KeyMaterial::Tpm { tpm, .. } = &party.keys {
                for finding in tpm.secrecy_scan() {
                    findings.push((id.clone(), finding));
                }
            }
        }
        findings
    }

    fn check_scheme(&self, id: &str, requested: Scheme) -> Result<(), ProtocolError> {
        let bound = self.party(id)?.scheme;
        if bound == requested {
            Ok(())
        } else {
            Err(ProtocolError::SchemeMismatch { id: id.to_string(), bound, requested })
        }
    }

    /// Opens a session: the owner produces its ephemeral point and waits
    /// for the peer's reply.
    pub fn initiate(
        &mut self,
        scheme: Scheme,
        owner: &str,
        peer: &str,
    ) -> Result<(GroupElement, SessionId), ProtocolError> {
        self.check_scheme(owner, scheme)?;
        self.party(peer)?;
        let (out, ephemeral) = self.fresh_ephemeral(owner)?;
        let revealable = match &ephemeral {
            EphemeralRef::HostScalar(x) => RevealableState {
                ephemeral_scalar: Some(x.clone()),
                ..RevealableState::default()
            },
            EphemeralRef::SlotCtr(_) => RevealableState::default(),
        };
        self.sessions.push(SessionRecord {
            scheme,
            owner: owner.to_string(),
            peer: peer.to_string(),
            out: out.clone(),
            inbound: None,
            role: Role::Initiator,
            state: SessionState::Open,
            ephemeral,
            key: None,
            revealable,
        });
        Ok((out, SessionId(self.sessions.len() - 1)))
    }

    /// Handles an incoming initiation: produces the reply point and
    /// completes the responder-side session in one step.
    pub fn respond(
        &mut self,
        scheme: Scheme,
        owner: &str,
        peer: &str,
        inbound: &GroupElement,
    ) -> Result<(GroupElement, SessionId), ProtocolError> {
        self.check_scheme(owner, scheme)?;
        self.party(peer)?;
        if !self.group.is_on_curve(inbound) {
            return Err(ProtocolError::OffCurve { which: "inbound ephemeral" });
        }
        let (out, ephemeral) = self.fresh_ephemeral(owner)?;
        let (key, revealable) =
            self.derive_key(scheme, owner, peer, Role::Responder, &ephemeral, &out, inbound)?;
        self.sessions.push(SessionRecord {
            scheme,
            owner: owner.to_string(),
            peer: peer.to_string(),
            out: out.clone(),
            inbound: Some(inbound.clone()),
            role: Role::Responder,
            state: SessionState::Completed,
            ephemeral,
            key: Some(key),
            revealable,
        });
        Ok((out, SessionId(self.sessions.len() - 1)))
    }

    /// Completes a previously opened session with the peer's reply point.
    pub fn complete(
        &mut self,
        scheme: Scheme,
        owner: &str,
        peer: &str,
        out: &GroupElement,
        inbound: &GroupElement,
    ) -> Result<SessionId, ProtocolError> {
        if !self.group.is_on_curve(inbound) {
            return Err(ProtocolError::OffCurve { which: "inbound ephemeral" });
        }
        let index = self
            .sessions
            .iter()
            .position(|s| {
                s.state == SessionState::Open
                    && s.role == Role::Initiator
                    && s.scheme == scheme
                    && s.owner == owner
                    && s.peer == peer
                    && &s.out == out
            })
            .ok_or_else(|| ProtocolError::NoOpenSession {
                scheme,
                owner: owner.to_string(),
                peer: peer.to_string(),
            })?;
        let ephemeral = self.sessions[index].ephemeral.clone();
        let (key, mut revealable) =
            self.derive_key(scheme, owner, peer, Role::Initiator, &ephemeral, out, inbound)?;
        if let EphemeralRef::HostScalar(x) = &ephemeral {
            revealable.ephemeral_scalar = Some(x.clone());
        }
        let session = &mut self.sessions[index];
        session.inbound = Some(inbound.clone());
        session.state = SessionState::Completed;
        session.key = Some(key);
        session.revealable = revealable;
        Ok(SessionId(index))
    }

    fn fresh_ephemeral(&mut self, owner: &str) -> Result<(GroupElement, EphemeralRef), ProtocolError> {
        let party = self
            .parties
            .get_mut(owner)
            .ok_or_else(|| ProtocolError::UnknownParty { id: owner.to_string() })?;
        match &mut party.keys {
            KeyMaterial::Tpm { tpm, .. } => {
                let (out, ctr) = tpm.tpm2_ec_ephemeral()?;
                Ok((out, EphemeralRef::SlotCtr(ctr)))
            }
            KeyMaterial::Software { .. } => {
                let x = self.group.sample_scalar(&mut self.rng);
                let out = self.group.exp_generator(&x)?;
                Ok((out, EphemeralRef::HostScalar(x)))
            }
            KeyMaterial::External { .. } => {
                Err(ProtocolError::NoPrivateKey { id: owner.to_string() })
            }
        }
    }

    /// Runs the scheme's second phase for one side and assembles the
    /// session key plus the revealable state the backing leaves behind.
    #[allow(clippy::too_many_arguments)]
    fn derive_key(
        &mut self,
        scheme: Scheme,
        owner: &str,
        peer: &str,
        role: Role,
        ephemeral: &EphemeralRef,
        out: &GroupElement,
        inbound: &GroupElement,
    ) -> Result<(SessionKey, RevealableState), ProtocolError> {
        let peer_static = self.party(peer)?.public_key();
        let owner_initiated = role == Role::Initiator;
        let (initiator, responder) = if owner_initiated { (owner, peer) } else { (peer, owner) };
        let (initiator_ephemeral, responder_ephemeral) =
            if owner_initiated { (out, inbound) } else { (inbound, out) };

        let party = self
            .parties
            .get_mut(owner)
            .ok_or_else(|| ProtocolError::UnknownParty { id: owner.to_string() })?;
        match (&mut party.keys, ephemeral) {
            (KeyMaterial::Tpm { tpm, handle, .. }, EphemeralRef::SlotCtr(ctr)) => {
                match tpm.mode() {
                    TpmMode::Revised => {
                        let key = tpm.tpm2_zgen_2phase_rev(
                            scheme,
                            *handle,
                            *ctr,
                            &peer_static,
                            inbound,
                            owner,
                            peer,
                            owner_initiated,
                        )?;
                        let revealable = RevealableState {
                            session_key: Some(key.clone()),
                            ..RevealableState::default()
                        };
                        Ok((key, revealable))
                    }
                    TpmMode::Original => {
                        let zout =
                            tpm.tpm2_zgen_2phase(scheme, *handle, *ctr, &peer_static, inbound)?;
                        match scheme {
                            Scheme::Ecdh => {
                                let transcript = Transcript::Um {
                                    z1: zout.z1,
                                    z2: zout.z2.expect("ecdh fills z2"),
                                    initiator: initiator.to_string(),
                                    responder: responder.to_string(),
                                    initiator_ephemeral: initiator_ephemeral.clone(),
                                    responder_ephemeral: responder_ephemeral.clone(),
                                };
                                let key = kdf::h1(&self.group, &transcript)?;
                                let revealable = RevealableState {
                                    session_key: Some(key.clone()),
                                    ..RevealableState::default()
                                };
                                Ok((key, revealable))
                            }
                            Scheme::Ecmqv | Scheme::Sm2 => {
                                let z = zout.z1;
                                let transcript = Transcript::Paired {
                                    z: z.clone(),
                                    initiator: initiator.to_string(),
                                    responder: responder.to_string(),
                                };
                                let key = kdf::h2(&self.group, &transcript)?;
                                let revealable = RevealableState {
                                    session_key: Some(key.clone()),
                                    shared_secrets: vec![z],
                                    ..RevealableState::default()
                                };
                                Ok((key, revealable))
                            }
                        }
                    }
                }
            }
            (KeyMaterial::Software { secret, .. }, EphemeralRef::HostScalar(x)) => {
                let secret = secret.clone();
                let x = x.clone();
                let group = &self.group;
                match scheme {
                    Scheme::Ecdh => {
                        let z1 = group.exp(&peer_static, &secret)?;
                        let z2 = group.exp(inbound, &x)?;
                        let transcript = Transcript::Um {
                            z1: z1.clone(),
                            z2: z2.clone(),
                            initiator: initiator.to_string(),
                            responder: responder.to_string(),
                            initiator_ephemeral: initiator_ephemeral.clone(),
                            responder_ephemeral: responder_ephemeral.clone(),
                        };
                        let key = kdf::h1(group, &transcript)?;
                        let revealable = RevealableState {
                            session_key: Some(key.clone()),
                            shared_secrets: vec![z1, z2],
                            ephemeral_scalar: Some(x),
                        };
                        Ok((key, revealable))
                    }
                    Scheme::Ecmqv | Scheme::Sm2 => {
                        let z = paired_shared_secret(
                            group,
                            scheme,
                            &secret,
                            &x,
                            out,
                            &peer_static,
                            inbound,
                        )?;
                        let transcript = Transcript::Paired {
                            z: z.clone(),
                            initiator: initiator.to_string(),
                            responder: responder.to_string(),
                        };
                        let key = kdf::h2(group, &transcript)?;
                        let revealable = RevealableState {
                            session_key: Some(key.clone()),
                            shared_secrets: vec![z],
                            ephemeral_scalar: Some(x),
                        };
                        Ok((key, revealable))
                    }
                }
            }
            _ => unreachable!("ephemeral kind always matches the backing"),
        }
    }

    /// One JSON line per session: the public identifier and outcome.
    pub fn transcript_jsonl(&self) -> String {
        let mut output = String::new();
        for (id, session) in self.sessions() {
            let line = serde_json::json!({
                "session": id.index(),
                "scheme": session.scheme.name(),
                "owner": session.owner,
                "peer": session.peer,
                "role": session.role,
                "state": session.state,
                "out": self.group.encode_hex(&session.out).ok(),
                "in": session.inbound.as_ref().and_then(|p| self.group.encode_hex(p).ok()),
                "session_key": session.key.as_ref().map(SessionKey::to_hex),
            });
            output.push_str(&line.to_string());
            output.push('\n');
        }
        output
    }
}

/// Declarative description of parties plus an activation script, loadable
/// from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub curve: String,
    pub seed: u64,
    pub parties: Vec<PartySpec>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartySpec {
    pub id: String,
    pub backing: Backing,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum Step {
    Initiate { scheme: Scheme, owner: String, peer: String, save_out: String },
    Respond { scheme: Scheme, owner: String, peer: String, inbound: String, save_out: String },
    Complete { scheme: Scheme, owner: String, peer: String, out: String, inbound: String },
}

/// A finished scenario run: the environment and the sessions each step
/// touched, in script order.
#[derive(Debug)]
pub struct ScenarioRun {
    pub env: Environment,
    pub touched: Vec<SessionId>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ProtocolError> {
    let group = Group::by_name(&scenario.curve)?;
    let mut env = Environment::new(group, scenario.seed);
    for party in &scenario.parties {
        env.register_party(&party.id, party.backing, party.scheme)?;
    }
    let mut labels: BTreeMap<String, GroupElement> = BTreeMap::new();
    let mut touched = Vec::new();
    let lookup = |labels: &BTreeMap<String, GroupElement>,
                  label: &str|
     -> Result<GroupElement, ProtocolError> {
        labels
            .get(label)
            .cloned()
            .ok_or_else(|| ProtocolError::UnknownLabel { label: label.to_string() })
    };
    for step in &scenario.steps {
        match step {
            Step::Initiate { scheme, owner, peer, save_out } => {
                let (out, sid) = env.initiate(*scheme, owner, peer)?;
                labels.insert(save_out.clone(), out);
                touched.push(sid);
            }
            Step::Respond { scheme, owner, peer, inbound, save_out } => {
                let inbound = lookup(&labels, inbound)?;
                let (out, sid) = env.respond(*scheme, owner, peer, &inbound)?;
                labels.insert(save_out.clone(), out);
                touched.push(sid);
            }
            Step::Complete { scheme, owner, peer, out, inbound } => {
                let out = lookup(&labels, out)?;
                let inbound = lookup(&labels, inbound)?;
                let sid = env.complete(*scheme, owner, peer, &out, &inbound)?;
                touched.push(sid);
            }
        }
    }
    Ok(ScenarioRun { env, touched })
}

/// The handshake scripts shipped with the binary: one per scheme, each a
/// TPM-revised initiator against a software responder on the toy curve.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    let (scheme, seed) = match name {
        "um-handshake" => (Scheme::Ecdh, 101),
        "mqv-handshake" => (Scheme::Ecmqv, 102),
        "sm2-handshake" => (Scheme::Sm2, 103),
        _ => return None,
    };
    Some(Scenario {
        name: name.to_string(),
        curve: "toy".to_string(),
        seed,
        parties: vec![
            PartySpec { id: "alice".into(), backing: Backing::TpmRevised, scheme },
            PartySpec { id: "bob".into(), backing: Backing::Software, scheme },
        ],
        steps: vec![
            Step::Initiate {
                scheme,
                owner: "alice".into(),
                peer: "bob".into(),
                save_out: "x".into(),
            },
            Step::Respond {
                scheme,
                owner: "bob".into(),
                peer: "alice".into(),
                inbound: "x".into(),
                save_out: "y".into(),
            },
            Step::Complete {
                scheme,
                owner: "alice".into(),
                peer: "bob".into(),
                out: "x".into(),
                inbound: "y".into(),
            },
        ],
    })
}
