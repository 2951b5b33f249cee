//! Attacker harness: deployment profiles, the adversary's query surface and
//! scripted reproductions of the published attacks on the three schemes.
//!
//! A [`Profile`] fixes what the deployment looks like from the attacker's
//! side: which backing honest parties run on, whether the attacker may
//! register keys of its own choosing without proving possession, and whether
//! corrupting a party can ever yield a plaintext long-term scalar. The five
//! profiles span plain software deployments, hosts calling the original
//! TPM2_ZGen_2Phase (whose MQV/SM2 session state holds the unhashed shared
//! secret Z), and hosts calling the revised command that returns only the
//! finished session key.
//!
//! [`AttackerEnv`] wraps a protocol [`Environment`] with the model's queries:
//! session state reveal, session key reveal, party corruption, attacker key
//! registration and the test query with its clean-session discipline. Each
//! scripted attack drives those queries plus its own group algebra and ends
//! in an [`AttackReport`]: either two byte-equal session keys derived over
//! independent code paths, or the first deployment obstacle it ran into.
//! [`run_attack_matrix`] evaluates every attack under every profile;
//! [`expected_matrix`] is the frozen outcome table the matrix must equal.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::group::{AvfPolicy, Group, GroupElement, Scalar};
use crate::kdf::{h1, h2, SessionKey, Transcript, SESSION_KEY_BYTES};
use crate::protocol::{
    matching, paired_shared_secret, Backing, CorruptionYield, Environment, ProtocolError,
    RevealableState, SessionId,
};
use crate::tpm::Scheme;

/// Deployment assumptions an attack runs under.
///
/// Strict variants model parties whose long-term keys were generated inside
/// their TPMs: nobody can register an externally chosen public key, and
/// corruption hands over the TPM as a black box rather than any scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    SoftwareMixed,
    TpmKe,
    TpmKeStrict,
    TpmKeRev,
    TpmKeRevStrict,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::SoftwareMixed,
        Profile::TpmKe,
        Profile::TpmKeStrict,
        Profile::TpmKeRev,
        Profile::TpmKeRevStrict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::SoftwareMixed => "software-mixed",
            Profile::TpmKe => "tpm-ke",
            Profile::TpmKeStrict => "tpm-ke-strict",
            Profile::TpmKeRev => "tpm-ke-rev",
            Profile::TpmKeRevStrict => "tpm-ke-rev-strict",
        }
    }

    /// Backing honest parties are registered with under this profile.
    pub fn honest_backing(self) -> Backing {
        match self {
            Profile::SoftwareMixed => Backing::Software,
            Profile::TpmKe | Profile::TpmKeStrict => Backing::TpmOriginal,
            Profile::TpmKeRev | Profile::TpmKeRevStrict => Backing::TpmRevised,
        }
    }

    /// Strict profiles refuse chosen-key registration and never let
    /// corruption yield a plaintext scalar.
    pub fn strict(self) -> bool {
        matches!(self, Profile::TpmKeStrict | Profile::TpmKeRevStrict)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Error)]
#[error("unknown profile {0:?}; expected one of software-mixed, tpm-ke, tpm-ke-strict, tpm-ke-rev, tpm-ke-rev-strict")]
pub struct UnknownProfile(pub String);

impl FromStr for Profile {
    type Err = UnknownProfile;

    fn from_str(s: &str) -> Result<Profile, UnknownProfile> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownProfile(s.to_string()))
    }
}

/// Failures of adversary queries, distinct from protocol failures so scripts
/// can tell a deployment refusal from a driver bug.
#[derive(Debug, Error)]
pub enum QueryError {
    #[error("profile forbids {query}")]
    ProfileForbidden { query: &'static str },
    #[error("session {0} is the test target or matches it")]
    ForbiddenTarget(usize),
    #[error("session {0} is not clean")]
    NotClean(usize),
    #[error("session {0} has not completed")]
    IncompleteSession(usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// One issued test query; the coin stays hidden here until adjudication.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestRecord {
    pub session: SessionId,
    pub coin: bool,
}

/// A protocol environment seen through the adversary's query interface.
///
/// The attacker controls message delivery, so activations (initiate, respond,
/// complete) are driven directly through [`AttackerEnv::env_mut`]; this
/// wrapper adds the queries whose availability depends on the profile and
/// keeps the exposure bookkeeping the test query's freshness rule needs.
pub struct AttackerEnv {
    env: Environment,
    profile: Profile,
    rng: ChaCha20Rng,
    revealed: BTreeSet<SessionId>,
    tests: Vec<TestRecord>,
}

impl AttackerEnv {
    pub fn new(group: Group, profile: Profile, seed: u64) -> AttackerEnv {
        AttackerEnv {
            env: Environment::new(group, seed),
            profile,
            rng: ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
            revealed: BTreeSet::new(),
            tests: Vec::new(),
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut Environment {
        &mut self.env
    }

    /// The attacker's own randomness, separate from every party's.
    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// Registers an honest party on the backing this profile prescribes.
    pub fn register_honest(
        &mut self,
        id: &str,
        scheme: Scheme,
    ) -> Result<GroupElement, ProtocolError> {
        let backing = self.profile.honest_backing();
        self.env.register_party(id, backing, scheme)
    }

    /// Registers an attacker-chosen public key with no proof of possession.
    pub fn establish_party(
        &mut self,
        id: &str,
        scheme: Scheme,
        public: GroupElement,
    ) -> Result<(), QueryError> {
        if self.profile.strict() {
            return Err(QueryError::ProfileForbidden { query: "attacker key registration" });
        }
        Ok(self.env.register_party_external(id, scheme, public)?)
    }

    /// Corrupts a party. Software keys come out in the clear only when the
    /// profile is not strict; TPM keys are always black-box.
    pub fn corrupt(&mut self, id: &str) -> Result<CorruptionYield, QueryError> {
        if self.profile.strict() && self.env.party(id)?.backing() == Backing::Software {
            return Err(QueryError::ProfileForbidden { query: "plaintext corruption" });
        }
        Ok(self.env.corrupt_party(id)?)
    }

    /// Reveals whatever session state the owner's backing retains.
    pub fn session_state_reveal(
        &mut self,
        sid: SessionId,
    ) -> Result<RevealableState, QueryError> {
        self.check_not_protected(sid)?;
        self.revealed.insert(sid);
        Ok(self.env.session(sid).revealable().clone())
    }

    /// Reveals a completed session's key.
    pub fn session_key_reveal(&mut self, sid: SessionId) -> Result<SessionKey, QueryError> {
        self.check_not_protected(sid)?;
        let key = self
            .env
            .session(sid)
            .key()
            .cloned()
            .ok_or(QueryError::IncompleteSession(sid.index()))?;
        self.revealed.insert(sid);
        Ok(key)
    }

    /// The test query: on a clean completed session, returns either the real
    /// key or fresh random bytes depending on a hidden coin drawn from a
    /// dedicated generator seeded by `coin_seed`.
    pub fn test_query(
        &mut self,
        sid: SessionId,
        coin_seed: u64,
    ) -> Result<[u8; SESSION_KEY_BYTES], QueryError> {
        let key = match self.env.session(sid).key() {
            Some(key) => *key.as_bytes(),
            None => return Err(QueryError::IncompleteSession(sid.index())),
        };
        let matching_revealed =
            self.matching_ids(sid).iter().any(|m| self.revealed.contains(m));
        if self.exposed(sid) || matching_revealed {
            return Err(QueryError::NotClean(sid.index()));
        }
        let mut coin_rng = ChaCha20Rng::seed_from_u64(coin_seed);
        let coin = coin_rng.next_u32() & 1 == 1;
        let mut out = key;
        if !coin {
            coin_rng.fill_bytes(&mut out);
        }
        self.tests.push(TestRecord { session: sid, coin });
        Ok(out)
    }

    /// Issued test queries with their coins, for adjudication.
    pub fn test_records(&self) -> &[TestRecord] {
        &self.tests
    }

    /// A session counts as exposed once its state or key was revealed or its
    /// owner is corrupted.
    pub fn exposed(&self, sid: SessionId) -> bool {
        if self.revealed.contains(&sid) {
            return true;
        }
        let owner = self.env.session(sid).owner();
        self.env.party(owner).map(|p| p.corrupted()).unwrap_or(false)
    }

    fn matching_ids(&self, sid: SessionId) -> Vec<SessionId> {
        let target = self.env.session(sid);
        self.env
            .sessions()
            .filter(|(other, record)| *other != sid && matching(target, record))
            .map(|(other, _)| other)
            .collect()
    }

    fn check_not_protected(&self, sid: SessionId) -> Result<(), QueryError> {
        let candidate = self.env.session(sid);
        for test in &self.tests {
            if test.session == sid || matching(self.env.session(test.session), candidate) {
                return Err(QueryError::ForbiddenTarget(sid.index()));
            }
        }
        Ok(())
    }
}

/// Why a script stopped short of a key comparison, or why the comparison
/// came out unequal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockReason {
    RegistrationBlocked,
    ZUnavailable,
    PlaintextUnavailable,
    KeysDiffer,
}

impl BlockReason {
    pub fn code(self) -> &'static str {
        match self {
            BlockReason::RegistrationBlocked => "registration-blocked",
            BlockReason::ZUnavailable => "z-unavailable",
            BlockReason::PlaintextUnavailable => "plaintext-unavailable",
            BlockReason::KeysDiffer => "keys-differ",
        }
    }
}

/// The adjudication record of a script that reached its key comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    /// Hex of the key the victim session derived.
    pub victim_key: String,
    /// Hex of the key the attacker assembled on its own path.
    pub attacker_key: String,
    pub victim_session: String,
    pub companion_session: Option<String>,
}

/// Outcome of one scripted attack under one profile.
#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub attack: String,
    pub profile: String,
    pub succeeded: bool,
    pub reason: Option<String>,
    pub evidence: Option<Evidence>,
}

impl AttackReport {
    fn blocked(attack: &str, profile: Profile, reason: BlockReason) -> AttackReport {
        AttackReport {
            attack: attack.to_string(),
            profile: profile.name().to_string(),
            succeeded: false,
            reason: Some(reason.code().to_string()),
            evidence: None,
        }
    }

    /// Success means nothing weaker than byte equality of both keys.
    fn decided(
        attack: &str,
        profile: Profile,
        victim_key: &SessionKey,
        attacker_key: &SessionKey,
        victim_session: String,
        companion_session: Option<String>,
    ) -> AttackReport {
        let succeeded = victim_key.as_bytes() == attacker_key.as_bytes();
        AttackReport {
            attack: attack.to_string(),
            profile: profile.name().to_string(),
            succeeded,
            reason: (!succeeded).then(|| BlockReason::KeysDiffer.code().to_string()),
            evidence: Some(Evidence {
                victim_key: victim_key.to_hex(),
                attacker_key: attacker_key.to_hex(),
                victim_session,
                companion_session,
            }),
        }
    }
}

fn describe(env: &Environment, sid: SessionId) -> String {
    let s = env.session(sid);
    let group = env.group();
    let inbound = s
        .inbound()
        .map(|p| group.encode_hex(p).expect("session points encode"))
        .unwrap_or_else(|| "-".to_string());
    format!(
        "#{} {} {}->{} out {} in {}",
        sid.index(),
        s.scheme().name(),
        s.owner(),
        s.peer(),
        group.encode_hex(s.out()).expect("session points encode"),
        inbound,
    )
}

/// A captured unknown key share needs two distinct, non-matching sessions.
fn assert_unknown_share(env: &Environment, a: SessionId, b: SessionId) {
    assert_ne!(a, b, "evidence sessions must be distinct");
    assert!(
        !matching(env.session(a), env.session(b)),
        "evidence sessions must not be matching sessions of each other"
    );
}

pub const KALISKI_UKS: &str = "kaliski-uks";
pub const SM2_UKS_SHIFTED_KEY: &str = "sm2-uks-shifted-key";
pub const SM2_UKS_KNOWN_KEY: &str = "sm2-uks-known-key";
pub const FIXED_AVF_MOCK: &str = "fixed-avf-impersonation-mock";
pub const FIXED_AVF_TOY: &str = "fixed-avf-impersonation-toy";
pub const UM_Z1_LEAK: &str = "um-z1-leak";
pub const UM_KCI: &str = "um-kci";
pub const MQV_KCI: &str = "mqv-kci";
pub const SM2_KCI: &str = "sm2-kci";

/// Every attack the matrix evaluates, in row order.
pub const ATTACK_NAMES: [&str; 9] = [
    KALISKI_UKS,
    SM2_UKS_SHIFTED_KEY,
    SM2_UKS_KNOWN_KEY,
    FIXED_AVF_MOCK,
    FIXED_AVF_TOY,
    UM_Z1_LEAK,
    UM_KCI,
    MQV_KCI,
    SM2_KCI,
];

/// Kaliski's unknown key share against MQV. The attacker intercepts alice's
/// opener X, registers C = g^(u/e) where X' = X A^d g^-u and e = avf(X'),
/// and relays X' to bob in its own name. Then X' C^e = X A^d, so bob's
/// shared secret equals alice's; one state reveal against bob's session and
/// a hash under alice's identities reproduces alice's key exactly.
pub fn kaliski_uks(profile: Profile, seed: u64) -> AttackReport {
    let group = Group::toy();
    let mut aenv = AttackerEnv::new(group.clone(), profile, seed);
    let a_pub = aenv.register_honest("alice", Scheme::Ecmqv).expect("fresh party");
    aenv.register_honest("bob", Scheme::Ecmqv).expect("fresh party");

    let (x_point, sid_a) =
        aenv.env_mut().initiate(Scheme::Ecmqv, "alice", "bob").expect("alice opens");

    let d = group.avf(&x_point, AvfPolicy::Mqv).expect("opener is a point");
    let x_a_d = group
        .mul(&x_point, &group.exp(&a_pub, &d).expect("curve exp"))
        .expect("curve mul");
    let (x_mal, c_pub) = loop {
        let u = group.sample_scalar(aenv.rng());
        let g_u = group.exp_generator(&u).expect("curve exp");
        let x_mal = group.mul(&x_a_d, &group.invert(&g_u).expect("curve invert")).expect("mul");
        if x_mal.is_identity() {
            continue;
        }
        let e = group.avf(&x_mal, AvfPolicy::Mqv).expect("non-identity point");
        let c = group.scalar_mul(&u, &group.scalar_inv(&e).expect("avf value is a unit"));
        let c_pub = group.exp_generator(&c).expect("curve exp");
        let recombined =
            group.mul(&x_mal, &group.exp(&c_pub, &e).expect("exp")).expect("mul");
        assert_eq!(recombined, x_a_d, "key crafting identity X' C^e = X A^d");
        break (x_mal, c_pub);
    };

    if aenv.establish_party("mallory", Scheme::Ecmqv, c_pub).is_err() {
        return AttackReport::blocked(KALISKI_UKS, profile, BlockReason::RegistrationBlocked);
    }

    let (y_point, sid_b) = aenv
        .env_mut()
        .respond(Scheme::Ecmqv, "bob", "mallory", &x_mal)
        .expect("bob answers mallory's opener");
    aenv.env_mut()
        .complete(Scheme::Ecmqv, "alice", "bob", &x_point, &y_point)
        .expect("alice accepts the relayed reply");

    let state = aenv.session_state_reveal(sid_b).expect("reveal is always permitted here");
    let Some(z_b) = state.shared_secrets.first().cloned() else {
        return AttackReport::blocked(KALISKI_UKS, profile, BlockReason::ZUnavailable);
    };
    let attacker_key = h2(
        &group,
        &Transcript::Paired { z: z_b, initiator: "alice".into(), responder: "bob".into() },
    )
    .expect("paired transcript");

    let victim_key = aenv.env().session(sid_a).key().cloned().expect("alice completed");
    assert_unknown_share(aenv.env(), sid_a, sid_b);
    AttackReport::decided(
        KALISKI_UKS,
        profile,
        &victim_key,
        &attacker_key,
        describe(aenv.env(), sid_a),
        Some(describe(aenv.env(), sid_b)),
    )
}

/// Unknown key share against SM2 via a shifted registered key M = A g^u.
/// Alice's opener passes to bob unchanged under mallory's name; bob's shared
/// secret then differs from alice's by the correction (B Y^e)^(h u), which
/// the attacker can compute entirely from public values.
pub fn sm2_uks_shifted_key(profile: Profile, seed: u64) -> AttackReport {
    let group = Group::toy();
    let mut aenv = AttackerEnv::new(group.clone(), profile, seed);
    let a_pub = aenv.register_honest("alice", Scheme::Sm2).expect("fresh party");
    let b_pub = aenv.register_honest("bob", Scheme::Sm2).expect("fresh party");

    let (x_point, sid_a) =
        aenv.env_mut().initiate(Scheme::Sm2, "alice", "bob").expect("alice opens");

    let (u, m_pub) = loop {
        let u = group.sample_scalar(aenv.rng());
        let m_pub = group
            .mul(&a_pub, &group.exp_generator(&u).expect("curve exp"))
            .expect("curve mul");
        if !m_pub.is_identity() {
            break (u, m_pub);
        }
    };
    if aenv.establish_party("mallory", Scheme::Sm2, m_pub).is_err() {
        return AttackReport::blocked(SM2_UKS_SHIFTED_KEY, profile, BlockReason::RegistrationBlocked);
    }

    let (y_point, sid_b) = aenv
        .env_mut()
        .respond(Scheme::Sm2, "bob", "mallory", &x_point)
        .expect("bob answers the replayed opener");
    aenv.env_mut()
        .complete(Scheme::Sm2, "alice", "bob", &x_point, &y_point)
        .expect("alice accepts the relayed reply");

    let state = aenv.session_state_reveal(sid_b).expect("reveal is always permitted here");
    let Some(z_b) = state.shared_secrets.first().cloned() else {
        return AttackReport::blocked(SM2_UKS_SHIFTED_KEY, profile, BlockReason::ZUnavailable);
    };

    let e = group.avf(&y_point, AvfPolicy::Sm2).expect("reply is a point");
    let b_y_e = group
        .mul(&b_pub, &group.exp(&y_point, &e).expect("curve exp"))
        .expect("curve mul");
    let h_u = group.scalar_mul(&group.scalar_from_u64(group.cofactor()), &u);
    let correction = group.exp(&b_y_e, &h_u).expect("curve exp");
    let z_a = group
        .mul(&z_b, &group.invert(&correction).expect("curve invert"))
        .expect("curve mul");
    let attacker_key = h2(
        &group,
        &Transcript::Paired { z: z_a, initiator: "alice".into(), responder: "bob".into() },
    )
    .expect("paired transcript");

    let victim_key = aenv.env().session(sid_a).key().cloned().expect("alice completed");
    assert_unknown_share(aenv.env(), sid_a, sid_b);
    AttackReport::decided(
        SM2_UKS_SHIFTED_KEY,
        profile,
        &victim_key,
        &attacker_key,
        describe(aenv.env(), sid_a),
        Some(describe(aenv.env(), sid_b)),
    )
}

/// Unknown key share against SM2 where the attacker's registered key M = g^m
/// is perfectly legal and its private half known. The opener forwarded to
/// bob becomes X' = A X^d; unwinding bob's shared secret by (B Y^e)^(h m)
/// and the exponent avf'(X')^-1 yields alice's shared secret.
///
/// Under strict profiles the attacker still gets a party of its own, but the
/// key lives in a TPM, so the recovery step that needs m in the clear fails.
pub fn sm2_uks_known_key(profile: Profile, seed: u64) -> AttackReport {
    let group = Group::toy();
    let mut aenv = AttackerEnv::new(group.clone(), profile, seed);
    let a_pub = aenv.register_honest("alice", Scheme::Sm2).expect("fresh party");
    let b_pub = aenv.register_honest("bob", Scheme::Sm2).expect("fresh party");

    let m_known = if aenv.profile().strict() {
        aenv.register_honest("mallory", Scheme::Sm2).expect("attacker-owned tpm party");
        None
    } else {
        let m = group.sample_scalar(aenv.rng());
        let m_pub = group.exp_generator(&m).expect("curve exp");
        aenv.establish_party("mallory", Scheme::Sm2, m_pub)
            .expect("non-strict profiles accept registration");
        Some(m)
    };

    let (x_point, sid_a, x_mal) = loop {
        let (x_point, sid_a) =
            aenv.env_mut().initiate(Scheme::Sm2, "alice", "bob").expect("alice opens");
        let d = group.avf(&x_point, AvfPolicy::Sm2).expect("opener is a point");
        let x_mal = group
            .mul(&a_pub, &group.exp(&x_point, &d).expect("curve exp"))
            .expect("curve mul");
        if !x_mal.is_identity() {
            break (x_point, sid_a, x_mal);
        }
    };

    let (y_point, sid_b) = aenv
        .env_mut()
        .respond(Scheme::Sm2, "bob", "mallory", &x_mal)
        .expect("bob answers mallory's opener");
    aenv.env_mut()
        .complete(Scheme::Sm2, "alice", "bob", &x_point, &y_point)
        .expect("alice accepts the relayed reply");

    let state = aenv.session_state_reveal(sid_b).expect("reveal is always permitted here");
    let Some(z_b) = state.shared_secrets.first().cloned() else {
        return AttackReport::blocked(SM2_UKS_KNOWN_KEY, profile, BlockReason::ZUnavailable);
    };
    let Some(m) = m_known else {
        return AttackReport::blocked(SM2_UKS_KNOWN_KEY, profile, BlockReason::PlaintextUnavailable);
    };

    let e = group.avf(&y_point, AvfPolicy::Sm2).expect("reply is a point");
    let b_y_e = group
        .mul(&b_pub, &group.exp(&y_point, &e).expect("curve exp"))
        .expect("curve mul");
    let h_m = group.scalar_mul(&group.scalar_from_u64(group.cofactor()), &m);
    let correction = group.exp(&b_y_e, &h_m).expect("curve exp");
    let quotient = group
        .mul(&z_b, &group.invert(&correction).expect("curve invert"))
        .expect("curve mul");
    let d_mal = group.avf(&x_mal, AvfPolicy::Sm2).expect("non-identity point");
    let z_a = group
        .exp(&quotient, &group.scalar_inv(&d_mal).expect("avf value is a unit"))
        .expect("curve exp");
    let attacker_key = h2(
        &group,
        &Transcript::Paired { z: z_a, initiator: "alice".into(), responder: "bob".into() },
    )
    .expect("paired transcript");

    let victim_key = aenv.env().session(sid_a).key().cloned().expect("alice completed");
    assert_unknown_share(aenv.env(), sid_a, sid_b);
    AttackReport::decided(
        SM2_UKS_KNOWN_KEY,
        profile,
        &victim_key,
        &attacker_key,
        describe(aenv.env(), sid_a),
        Some(describe(aenv.env(), sid_b)),
    )
}

/// Impersonation that works whenever the associated value function is a
/// constant v on the whole group. The attacker sends X* = g^(x*) A^-v in
/// alice's name; bob computes Z = (X* A^v)^(h(y + v b)) = (g^(x*))^(h(y + v b)),
/// which the attacker reproduces as (Y B^v)^(h x*) without touching a single
/// secret. On groups whose avf actually varies, avf(X*) != v and the keys
/// disagree.
pub fn fixed_avf_impersonation(
    group: &Group,
    tag: &str,
    profile: Profile,
    seed: u64,
) -> AttackReport {
    let attack = format!("fixed-avf-impersonation-{tag}");
    let mut aenv = AttackerEnv::new(group.clone(), profile, seed);
    let a_pub = aenv.register_honest("alice", Scheme::Ecmqv).expect("fresh party");
    let b_pub = aenv.register_honest("bob", Scheme::Ecmqv).expect("fresh party");

    let v = group.avf(&group.generator(), AvfPolicy::Mqv).expect("generator avf");
    let a_v_inv = group.invert(&group.exp(&a_pub, &v).expect("curve exp")).expect("invert");
    let (x_star, x_fake) = loop {
        let x_star = group.sample_scalar(aenv.rng());
        let x_fake = group
            .mul(&group.exp_generator(&x_star).expect("curve exp"), &a_v_inv)
            .expect("curve mul");
        if !x_fake.is_identity() {
            break (x_star, x_fake);
        }
    };

    let (y_point, sid_b) = aenv
        .env_mut()
        .respond(Scheme::Ecmqv, "bob", "alice", &x_fake)
        .expect("bob answers what looks like alice's opener");

    let b_y_v = group
        .mul(&y_point, &group.exp(&b_pub, &v).expect("curve exp"))
        .expect("curve mul");
    let cofactor = group.scalar_from_u64(group.cofactor());
    let z_att = group
        .exp(&group.exp(&b_y_v, &cofactor).expect("curve exp"), &x_star)
        .expect("curve exp");
    let attacker_key = h2(
        group,
        &Transcript::Paired { z: z_att, initiator: "alice".into(), responder: "bob".into() },
    )
    .expect("paired transcript");

    let victim_key = aenv.env().session(sid_b).key().cloned().expect("bob completed");
    AttackReport::decided(
        &attack,
        profile,
        &victim_key,
        &attacker_key,
        describe(aenv.env(), sid_b),
        None,
    )
}

/// Permanent impersonation of alice to bob from a single leaked static-static
/// secret Z1 = g^(ab). The UM key mixes Z1 with an ephemeral-ephemeral secret
/// the attacker can always produce itself, so one past state reveal breaks
/// every future handshake. Only the software backing ever exposes Z1: both
/// TPM command variants keep the UM path's unhashed values inside the TPM.
pub fn um_z1_leak(profile: Profile, seed: u64) -> AttackReport {
    let group = Group::toy();
    let mut aenv = AttackerEnv::new(group.clone(), profile, seed);
    aenv.register_honest("alice", Scheme::Ecdh).expect("fresh party");
    aenv.register_honest("bob", Scheme::Ecdh).expect("fresh party");

    let (x0, sid_a0) =
        aenv.env_mut().initiate(Scheme::Ecdh, "alice", "bob").expect("alice opens");
    let (y0, _sid_b0) =
        aenv.env_mut().respond(Scheme::Ecdh, "bob", "alice", &x0).expect("bob answers");
    aenv.env_mut().complete(Scheme::Ecdh, "alice", "bob", &x0, &y0).expect("alice completes");

    let state = aenv.session_state_reveal(sid_a0).expect("reveal is always permitted here");
    let Some(z1) = state.shared_secrets.first().cloned() else {
        return AttackReport::blocked(UM_Z1_LEAK, profile, BlockReason::ZUnavailable);
    };

    let x_att = group.sample_scalar(aenv.rng());
    let x_fake = group.exp_generator(&x_att).expect("curve exp");
    let (y1, sid_b1) = aenv
        .env_mut()
        .respond(Scheme::Ecdh, "bob", "alice", &x_fake)
        .expect("bob answers what looks like alice's opener");
    let z2 = group.exp(&y1, &x_att).expect("curve exp");
    let attacker_key = h1(
        &group,
        &Transcript::Um {
            z1,
            z2,
            initiator: "alice".into(),
            responder: "bob".into(),
            initiator_ephemeral: x_fake,
            responder_ephemeral: y1,
        },
    )
    .expect("um transcript");

    let victim_key = aenv.env().session(sid_b1).key().cloned().expect("bob completed");
    assert_unknown_share(aenv.env(), sid_b1, sid_a0);
    AttackReport::decided(
        UM_Z1_LEAK,
        profile,
        &victim_key,
        &attacker_key,
        describe(aenv.env(), sid_b1),
        Some(describe(aenv.env(), sid_a0)),
    )
}

/// Key-compromise impersonation: holding alice's long-term scalar, the
/// attacker answers her opener in bob's name. Under UM the attacker can
/// compute both halves of the transcript (B^a and X^y), so alice's key falls.
/// MQV and SM2 tangle bob's static key into the shared secret with exponents
/// the attacker cannot complete; the script still runs its best candidate,
/// substituting the one scalar it holds, and the keys come out different.
fn kci_attack(attack: &'static str, scheme: Scheme, profile: Profile, seed: u64) -> AttackReport {
    let group = Group::toy();
    let mut aenv = AttackerEnv::new(group.clone(), profile, seed);
    let a_pub = aenv.register_honest("alice", scheme).expect("fresh party");
    let b_pub = aenv.register_honest("bob", scheme).expect("fresh party");

    let a_secret = match aenv.corrupt("alice") {
        Ok(CorruptionYield::SoftwareSecret(a)) => a,
        Ok(_) | Err(_) => {
            return AttackReport::blocked(attack, profile, BlockReason::PlaintextUnavailable)
        }
    };

    let (x_point, sid_a) = aenv.env_mut().initiate(scheme, "alice", "bob").expect("alice opens");
    let y_secret = group.sample_scalar(aenv.rng());
    let y_point = group.exp_generator(&y_secret).expect("curve exp");
    aenv.env_mut()
        .complete(scheme, "alice", "bob", &x_point, &y_point)
        .expect("alice accepts the forged reply");

    let cofactor = group.scalar_from_u64(group.cofactor());
    let attacker_key = match scheme {
        Scheme::Ecdh => {
            let z1 = group.exp(&b_pub, &a_secret).expect("curve exp");
            let z2 = group.exp(&x_point, &y_secret).expect("curve exp");
            h1(
                &group,
                &Transcript::Um {
                    z1,
                    z2,
                    initiator: "alice".into(),
                    responder: "bob".into(),
                    initiator_ephemeral: x_point.clone(),
                    responder_ephemeral: y_point.clone(),
                },
            )
            .expect("um transcript")
        }
        Scheme::Ecmqv => {
            let d = group.avf(&x_point, AvfPolicy::Mqv).expect("opener avf");
            let e = group.avf(&y_point, AvfPolicy::Mqv).expect("reply avf");
            let base = group
                .mul(&x_point, &group.exp(&a_pub, &d).expect("curve exp"))
                .expect("curve mul");
            let inner = group.scalar_add(&y_secret, &group.scalar_mul(&e, &a_secret));
            let z = group
                .exp(&group.exp(&base, &cofactor).expect("curve exp"), &inner)
                .expect("curve exp");
            h2(
                &group,
                &Transcript::Paired { z, initiator: "alice".into(), responder: "bob".into() },
            )
            .expect("paired transcript")
        }
        Scheme::Sm2 => {
            let d = group.avf(&x_point, AvfPolicy::Sm2).expect("opener avf");
            let e = group.avf(&y_point, AvfPolicy::Sm2).expect("reply avf");
            let base = group
                .mul(&a_pub, &group.exp(&x_point, &d).expect("curve exp"))
                .expect("curve mul");
            let inner = group.scalar_add(&a_secret, &group.scalar_mul(&e, &y_secret));
            let z = group
                .exp(&group.exp(&base, &cofactor).expect("curve exp"), &inner)
                .expect("curve exp");
            h2(
                &group,
                &Transcript::Paired { z, initiator: "alice".into(), responder: "bob".into() },
            )
            .expect("paired transcript")
        }
    };

    let victim_key = aenv.env().session(sid_a).key().cloned().expect("alice completed");
    AttackReport::decided(
        attack,
        profile,
        &victim_key,
        &attacker_key,
        describe(aenv.env(), sid_a),
        None,
    )
}

pub fn um_kci(profile: Profile, seed: u64) -> AttackReport {
    kci_attack(UM_KCI, Scheme::Ecdh, profile, seed)
}

pub fn mqv_kci(profile: Profile, seed: u64) -> AttackReport {
    kci_attack(MQV_KCI, Scheme::Ecmqv, profile, seed)
}

pub fn sm2_kci(profile: Profile, seed: u64) -> AttackReport {
    kci_attack(SM2_KCI, Scheme::Sm2, profile, seed)
}

/// Runs one attack by matrix row name; `None` for an unknown name.
pub fn run_attack(name: &str, profile: Profile, seed: u64) -> Option<AttackReport> {
    Some(match name {
        KALISKI_UKS => kaliski_uks(profile, seed),
        SM2_UKS_SHIFTED_KEY => sm2_uks_shifted_key(profile, seed),
        SM2_UKS_KNOWN_KEY => sm2_uks_known_key(profile, seed),
        FIXED_AVF_MOCK => {
            fixed_avf_impersonation(&Group::fixed_lsb_mock(8, 5), "mock", profile, seed)
        }
        FIXED_AVF_TOY => fixed_avf_impersonation(&Group::toy(), "toy", profile, seed),
        UM_Z1_LEAK => um_z1_leak(profile, seed),
        UM_KCI => um_kci(profile, seed),
        MQV_KCI => mqv_kci(profile, seed),
        SM2_KCI => sm2_kci(profile, seed),
        _ => return None,
    })
}

/// One cell of the outcome matrix: attack row, profile column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixCell {
    pub profile: String,
    pub succeeded: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub attack: String,
    pub cells: Vec<MatrixCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackMatrix {
    pub rows: Vec<MatrixRow>,
}

impl MatrixCell {
    /// "ok" for a success, otherwise the block reason code.
    pub fn outcome(&self) -> &str {
        if self.succeeded {
            "ok"
        } else {
            self.reason.as_deref().unwrap_or("failed")
        }
    }
}

fn cell_text(cell: &MatrixCell) -> &str {
    cell.outcome()
}

impl AttackMatrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    /// Fixed-width text table: one row per attack, one column per profile.
    pub fn render_table(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["attack".to_string()];
        if let Some(first) = self.rows.first() {
            header.extend(first.cells.iter().map(|c| c.profile.clone()));
        }
        grid.push(header);
        for row in &self.rows {
            let mut line = vec![row.attack.clone()];
            line.extend(row.cells.iter().map(|c| cell_text(c).to_string()));
            grid.push(line);
        }
        let columns = grid[0].len();
        let widths: Vec<usize> = (0..columns)
            .map(|i| grid.iter().map(|r| r.get(i).map_or(0, String::len)).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let mut line = String::new();
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    line.push_str("  ");
                }
                line.push_str(&format!("{cell:<width$}", width = widths[i]));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// Cell-level mismatches against an expected matrix, human readable.
    pub fn diff(&self, expected: &AttackMatrix) -> Vec<String> {
        let mut out = Vec::new();
        if self.rows.len() != expected.rows.len() {
            out.push(format!(
                "matrix has {} rows, expected {}",
                self.rows.len(),
                expected.rows.len()
            ));
        }
        for (got, want) in self.rows.iter().zip(&expected.rows) {
            if got.attack != want.attack {
                out.push(format!("row {:?} where {:?} was expected", got.attack, want.attack));
                continue;
            }
            for (gc, wc) in got.cells.iter().zip(&want.cells) {
                if gc != wc {
                    out.push(format!(
                        "{} under {}: got {}, expected {}",
                        got.attack,
                        gc.profile,
                        cell_text(gc),
                        cell_text(wc)
                    ));
                }
            }
        }
        out
    }

    /// Projection onto a subset of attacks and profiles, in table order.
    /// `None` when a requested attack or profile is absent.
    pub fn select(&self, attacks: &[&str], profiles: &[Profile]) -> Option<AttackMatrix> {
        let rows = attacks
            .iter()
            .map(|&attack| {
                let row = self.rows.iter().find(|r| r.attack == attack)?;
                let cells = profiles
                    .iter()
                    .map(|p| row.cells.iter().find(|c| c.profile == p.name()).cloned())
                    .collect::<Option<Vec<_>>>()?;
                Some(MatrixRow { attack: row.attack.clone(), cells })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(AttackMatrix { rows })
    }
}

/// Evaluates the selected attacks under the selected profiles. Each cell's
/// seed is derived from its position in the full table, so a filtered run
/// reproduces the corresponding cells of the full one. `None` when an
/// attack name is unknown.
pub fn run_attack_selection(
    seed: u64,
    attacks: &[&str],
    profiles: &[Profile],
) -> Option<AttackMatrix> {
    let mut rows = Vec::with_capacity(attacks.len());
    for &name in attacks {
        let i = ATTACK_NAMES.iter().position(|&n| n == name)?;
        let mut cells = Vec::with_capacity(profiles.len());
        for profile in profiles {
            let j = Profile::ALL.iter().position(|p| p == profile).expect("profile in table");
            let cell_seed = seed.wrapping_add(((i * Profile::ALL.len() + j) as u64) * 1009);
            let report = run_attack(name, *profile, cell_seed).expect("known attack name");
            cells.push(MatrixCell {
                profile: profile.name().to_string(),
                succeeded: report.succeeded,
                reason: report.reason,
            });
        }
        rows.push(MatrixRow { attack: name.to_string(), cells });
    }
    Some(AttackMatrix { rows })
}

/// Evaluates every attack under every profile. Each cell gets its own seed
/// derived from `seed`, so the whole matrix is reproducible.
pub fn run_attack_matrix(seed: u64) -> AttackMatrix {
    run_attack_selection(seed, &ATTACK_NAMES, &Profile::ALL).expect("full table names are known")
}

/// The outcome table the matrix must reproduce exactly.
pub fn expected_matrix() -> AttackMatrix {
    use BlockReason::{KeysDiffer, PlaintextUnavailable, RegistrationBlocked, ZUnavailable};

    fn row(attack: &str, outcomes: [Option<BlockReason>; 5]) -> MatrixRow {
        MatrixRow {
            attack: attack.to_string(),
            cells: Profile::ALL
                .iter()
                .zip(outcomes)
                .map(|(profile, block)| MatrixCell {
                    profile: profile.name().to_string(),
                    succeeded: block.is_none(),
                    reason: block.map(|b| b.code().to_string()),
                })
                .collect(),
        }
    }

    AttackMatrix {
        rows: vec![
            row(
                KALISKI_UKS,
                [
                    None,
                    None,
                    Some(RegistrationBlocked),
                    Some(ZUnavailable),
                    Some(RegistrationBlocked),
                ],
            ),
            row(
                SM2_UKS_SHIFTED_KEY,
                [
                    None,
                    None,
                    Some(RegistrationBlocked),
                    Some(ZUnavailable),
                    Some(RegistrationBlocked),
                ],
            ),
            row(
                SM2_UKS_KNOWN_KEY,
                [
                    None,
                    None,
                    Some(PlaintextUnavailable),
                    Some(ZUnavailable),
                    Some(ZUnavailable),
                ],
            ),
            row(FIXED_AVF_MOCK, [None, None, None, None, None]),
            row(FIXED_AVF_TOY, [Some(KeysDiffer); 5]),
            row(
                UM_Z1_LEAK,
                [
                    None,
                    Some(ZUnavailable),
                    Some(ZUnavailable),
                    Some(ZUnavailable),
                    Some(ZUnavailable),
                ],
            ),
            row(
                UM_KCI,
                [
                    None,
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                ],
            ),
            row(
                MQV_KCI,
                [
                    Some(KeysDiffer),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                ],
            ),
            row(
                SM2_KCI,
                [
                    Some(KeysDiffer),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                    Some(PlaintextUnavailable),
                ],
            ),
        ],
    }
}

/// Checks an MQV response (Y, Z) against a challenger who knows its own
/// ephemeral exponent x and static scalar a: valid iff
/// Z = (Y B^avf(Y))^(h (x + avf(g^x) a)).
pub fn verify_mqv_functionality(
    group: &Group,
    a: &Scalar,
    x: &Scalar,
    peer_static: &GroupElement,
    response_ephemeral: &GroupElement,
    response_z: &GroupElement,
) -> Result<bool, ProtocolError> {
    let own_ephemeral_public = group.exp_generator(x)?;
    let expected = paired_shared_secret(
        group,
        Scheme::Ecmqv,
        a,
        x,
        &own_ephemeral_public,
        peer_static,
        response_ephemeral,
    )?;
    Ok(expected == *response_z)
}

/// SM2 variant of the response checker: valid iff
/// Z = (B Y^avf'(Y))^(h (a + avf'(g^x) x)).
pub fn verify_sm2_functionality(
    group: &Group,
    a: &Scalar,
    x: &Scalar,
    peer_static: &GroupElement,
    response_ephemeral: &GroupElement,
    response_z: &GroupElement,
) -> Result<bool, ProtocolError> {
    let own_ephemeral_public = group.exp_generator(x)?;
    let expected = paired_shared_secret(
        group,
        Scheme::Sm2,
        a,
        x,
        &own_ephemeral_public,
        peer_static,
        response_ephemeral,
    )?;
    Ok(expected == *response_z)
}
