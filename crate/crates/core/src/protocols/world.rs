//! Parties, the public environment they share, and a driver that runs the
//! protocols between them over a framed, logged link.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use ed25519_dalek::VerifyingKey;
use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::biometric::{self, IrisTemplate, Matcher};
use crate::chameleon::{keygen, KeyPair, PublicKey};
use crate::group::{SystemParams, ELEMENT_BYTES, PROFILE_NAME};
use crate::identity::{avatar_create, mit_issue, mit_verify, Avatar, Ed25519Issuer, FirstImpressionIndex, Hid, Mid, Mit};
use crate::ledger::{shared, Namespace, SharedStore, Store, StoreError};
use crate::signcryption::HybridEnvelope;

use super::avatar::{scene_digest, AvatarProver, AvatarVerifier, Recall};
use super::messages::{tag, Message, StoredFi, Transcript};
use super::storage::{fi_create, ContractSession, CtWriter};
use super::{Phase, RejectReason, Rejection};

/// Noise rate of live iris captures unless configured otherwise.
pub const DEFAULT_NOISE_RATE: f64 = 0.05;

/// What every party can read: parameters, the issuer's key, the contract's
/// key and the shared store.
#[derive(Clone)]
pub struct Environment {
    pub params: SystemParams,
    pub idp: VerifyingKey,
    pub contract_pk: PublicKey,
    pub store: SharedStore,
    pub matcher: Matcher,
}

impl Environment {
    /// Resolves and authenticates the MIT registered under `hid`.
    pub fn mit(&self, hid: &Hid) -> Result<Mit, RejectReason> {
        let bytes = match self.store.read().resolve(hid.as_bytes()) {
            Ok(Some(b)) => b,
            Ok(None) => return Err(RejectReason::MitMissing),
            Err(_) => return Err(RejectReason::Storage),
        };
        let mit = Mit::from_bytes(&bytes).map_err(|_| RejectReason::MitInvalid)?;
        if mit.hid != *hid || !mit_verify(&self.idp, &mit) {
            return Err(RejectReason::MitInvalid);
        }
        Ok(mit)
    }

    /// The stored envelope for `index`, if one was written.
    pub fn fi_envelope(&self, index: &FirstImpressionIndex) -> Result<Option<HybridEnvelope>, RejectReason> {
        match self.store.read().resolve(&index.to_bytes()) {
            Ok(None) => Ok(None),
            Ok(Some(b)) => HybridEnvelope::from_bytes(&b)
                .map(Some)
                .map_err(|_| RejectReason::FiDecrypt),
            Err(_) => Err(RejectReason::Storage),
        }
    }

    /// Keys of all first-impression index entries, in ledger order.
    pub fn fi_indices(&self) -> Vec<FirstImpressionIndex> {
        self.store
            .read()
            .ledger
            .transactions()
            .iter()
            .filter(|tx| tx.namespace == Namespace::FiIndex)
            .filter_map(|tx| FirstImpressionIndex::from_bytes(&tx.key).ok())
            .collect()
    }

    /// Hids of all registered MITs, in ledger order.
    pub fn registered(&self) -> Vec<Hid> {
        self.store
            .read()
            .ledger
            .transactions()
            .iter()
            .filter(|tx| tx.namespace == Namespace::MitIndex)
            .filter_map(|tx| tx.key.as_slice().try_into().ok().map(Hid))
            .collect()
    }
}

/// Issues and publishes MITs.
pub struct IdentityProvider {
    issuer: Ed25519Issuer,
    next_serial: AtomicU64,
}

impl IdentityProvider {
    pub fn new(issuer: Ed25519Issuer, next_serial: u64) -> Self {
        IdentityProvider {
            issuer,
            next_serial: AtomicU64::new(next_serial),
        }
    }

    pub fn issuer(&self) -> &Ed25519Issuer {
        &self.issuer
    }

    pub fn next_serial(&self) -> u64 {
        self.next_serial.load(Ordering::SeqCst)
    }

    /// Issues an MIT for `mid` and writes it to the store.
    pub fn register(
        &self,
        store: &SharedStore,
        mid: &Mid,
        pk: &PublicKey,
        template: &IrisTemplate,
    ) -> Result<Mit, StoreError> {
        let serial = self.next_serial.fetch_add(1, Ordering::SeqCst);
        let mit = mit_issue(&self.issuer, serial, mid, pk, template);
        store
            .write()
            .put_indexed(Namespace::MitIndex, Namespace::MitRecord, mit.hid.as_bytes(), &mit.to_bytes())?;
        Ok(mit)
    }
}

/// The storage contract `S`.
pub struct Contract {
    pub keys: KeyPair,
}

/// What a participant remembers of a first impression it wrote.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recollection {
    #[serde(with = "hex::serde")]
    pub scene_digest: [u8; 32],
}

/// A registered user and everything it keeps to itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Participant {
    pub name: String,
    pub mid: Mid,
    pub keys: KeyPair,
    pub avatar: Avatar,
    pub iris_seed: u64,
    pub noise_rate: f64,
    /// Keyed by the scene owner's Hid.
    #[serde(default)]
    pub recollections: BTreeMap<Hid, Recollection>,
}

impl Participant {
    pub fn hid(&self) -> Hid {
        self.mid.hid()
    }

    /// The subject's enrolled code, the source of live samples.
    pub fn iris(&self) -> IrisTemplate {
        biometric::enroll(self.iris_seed)
    }
}

/// Which ciphertext component a tamper hook flips a bit in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtField {
    K,
    Z,
    R,
}

/// Flips bit `bit` (MSB first, wrapping) of `field` in an encoded
/// ciphertext.
pub fn flip_ciphertext_bit(encoded: &mut [u8], field: CtField, bit: usize) {
    let header = 1 + PROFILE_NAME.len() + 4;
    let (start, len) = match field {
        CtField::K => (header, ELEMENT_BYTES),
        CtField::Z => (header + ELEMENT_BYTES, encoded.len() - header - 2 * ELEMENT_BYTES),
        CtField::R => (encoded.len() - ELEMENT_BYTES, ELEMENT_BYTES),
    };
    let bit = bit % (len * 8);
    encoded[start + bit / 8] ^= 0x80 >> (bit % 8);
}

type Edit = Box<dyn FnMut(&mut Vec<u8>) + Send>;

/// Rewrites the payload of the first message carrying `tag`.
pub struct Tamper {
    tag: u8,
    edit: Edit,
    spent: bool,
}

impl Tamper {
    pub fn new(tag: u8, edit: impl FnMut(&mut Vec<u8>) + Send + 'static) -> Self {
        Tamper {
            tag,
            edit: Box::new(edit),
            spent: false,
        }
    }

    /// Flips one bit of the avatar response ciphertext.
    pub fn response_bit(field: CtField, bit: usize) -> Self {
        Tamper::new(tag::RESPONSE, move |p| flip_ciphertext_bit(p, field, bit))
    }
}

/// An in-process link that frames, logs and optionally tampers with every
/// message it carries.
#[derive(Default)]
pub struct Link {
    pub transcript: Transcript,
    tamper: Option<Tamper>,
}

impl Link {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tamper(tamper: Tamper) -> Self {
        Link {
            transcript: Transcript::default(),
            tamper: Some(tamper),
        }
    }

    /// Delivers `msg`. A payload that no longer decodes is reported as the
    /// receiver would report it.
    pub fn carry(&mut self, from: &str, to: &str, msg: &Message) -> Result<Message, RejectReason> {
        let tag = msg.tag();
        let mut payload = msg.payload();
        if let Some(t) = self.tamper.as_mut().filter(|t| !t.spent && t.tag == tag) {
            (t.edit)(&mut payload);
            t.spent = true;
        }
        self.transcript.record(from, to, tag, &payload);
        Message::decode_payload(tag, &payload).map_err(|_| match tag {
            tag::RESPONSE | tag::CT_RESPONSE => RejectReason::DscFailure,
            _ => RejectReason::Malformed,
        })
    }
}

/// Outcome of one prover-to-verifier authentication.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionReport {
    pub prover: String,
    pub verifier: String,
    pub recall: Recall,
    pub prover_key: String,
    pub verifier_key: String,
    pub keys_agree: bool,
    pub first_impression: Option<StoredFi>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct MeetReport {
    pub directions: Vec<DirectionReport>,
    pub transcript: Transcript,
}

#[derive(Debug)]
pub struct MeetFailure {
    pub prover: String,
    pub verifier: String,
    pub rejection: Rejection,
    pub transcript: Transcript,
}

impl std::fmt::Display for MeetFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}: {}", self.prover, self.verifier, self.rejection)
    }
}

impl std::error::Error for MeetFailure {}

pub const CONTRACT_NAME: &str = "S";

/// The identity provider, the storage contract and the environment they
/// publish into.
pub struct World {
    pub env: Environment,
    pub idp: IdentityProvider,
    pub contract: Contract,
}

impl World {
    pub fn new<R: RngCore + CryptoRng>(params: SystemParams, rng: &mut R) -> Self {
        let contract = keygen(&params, rng);
        let issuer = Ed25519Issuer::generate(rng);
        Self::from_parts(params, issuer, 1, contract, Store::new())
    }

    pub fn from_parts(
        params: SystemParams,
        issuer: Ed25519Issuer,
        next_serial: u64,
        contract: KeyPair,
        store: Store,
    ) -> Self {
        World {
            env: Environment {
                params,
                idp: issuer.verifying_key(),
                contract_pk: *contract.public(),
                store: shared(store),
                matcher: Matcher::default(),
            },
            idp: IdentityProvider::new(issuer, next_serial),
            contract: Contract { keys: contract },
        }
    }

    /// Key generation, MIT issuance and publication, avatar creation.
    pub fn enroll<R: RngCore + CryptoRng>(
        &self,
        name: &str,
        mid: Mid,
        iris_seed: u64,
        visible: &[u8],
        rng: &mut R,
    ) -> Result<Participant, StoreError> {
        let keys = keygen(&self.env.params, rng);
        self.idp
            .register(&self.env.store, &mid, keys.public(), &biometric::enroll(iris_seed))?;
        let avatar = avatar_create(&keys, mid.hid(), visible, rng);
        Ok(Participant {
            name: name.to_string(),
            mid,
            keys,
            avatar,
            iris_seed,
            noise_rate: DEFAULT_NOISE_RATE,
            recollections: BTreeMap::new(),
        })
    }

    /// `prover` authenticates to `verifier`. On a first meeting the prover
    /// then hands over `scene` and the verifier writes it through the
    /// contract.
    pub fn authenticate<R: RngCore + CryptoRng>(
        &self,
        prover: &Participant,
        verifier: &mut Participant,
        scene: &[u8],
        link: &mut Link,
        rng: &mut R,
    ) -> Result<DirectionReport, Rejection> {
        let started = Instant::now();
        let (p, v) = (prover.name.clone(), verifier.name.clone());
        let reject = |link: &mut Link, from: &str, to: &str, r: Rejection| {
            let _ = link.carry(from, to, &Message::Reject(r.reason));
            r
        };
        let at = |phase: Phase| move |reason: RejectReason| Rejection { phase, reason };

        let mut prover_sm = AvatarProver::new(prover, &self.env, verifier.hid());
        let mut verifier_sm = AvatarVerifier::new(verifier, &self.env);

        let claim = prover_sm.claim()?;
        let Message::Claim(claim) = link.carry(&p, &v, &Message::Claim(claim)).map_err(at(Phase::Challenge))?
        else {
            unreachable!("tag preserved")
        };
        let challenge = verifier_sm
            .on_claim(&claim, rng)
            .map_err(|r| reject(link, &v, &p, r))?;
        let Message::Challenge(challenge) = link
            .carry(&v, &p, &Message::Challenge(challenge))
            .map_err(at(Phase::Response))?
        else {
            unreachable!("tag preserved")
        };
        let response = prover_sm.respond(&challenge, rng)?;
        let response = match link.carry(&p, &v, &Message::Response(response)) {
            Ok(Message::Response(r)) => r,
            Ok(_) => unreachable!("tag preserved"),
            Err(reason) => return Err(reject(link, &v, &p, at(Phase::Verify)(reason))),
        };
        let handshake = verifier_sm
            .on_response(&response, rng)
            .map_err(|r| reject(link, &v, &p, r))?;
        let Message::Handshake(handshake) = link
            .carry(&v, &p, &Message::Handshake(handshake))
            .map_err(at(Phase::Done))?
        else {
            unreachable!("tag preserved")
        };
        let prover_key = prover_sm.finish(&handshake)?;
        let verifier_key = verifier_sm.session_key().expect("verified").clone();
        let recall = verifier_sm.recall().expect("verified").clone();
        let prover_pk = *verifier_sm.prover_key().expect("verified");
        drop(verifier_sm);

        let first_impression = if handshake.create_fi {
            Some(self.write_first_impression(prover, &prover_pk, &claim, verifier, scene, link, rng)?)
        } else {
            None
        };

        Ok(DirectionReport {
            prover: p,
            verifier: v,
            recall,
            keys_agree: prover_key == verifier_key,
            prover_key: prover_key.fingerprint(),
            verifier_key: verifier_key.fingerprint(),
            first_impression,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn write_first_impression<R: RngCore + CryptoRng>(
        &self,
        owner: &Participant,
        owner_pk: &PublicKey,
        owner_claim: &super::messages::Claim,
        writer: &mut Participant,
        scene: &[u8],
        link: &mut Link,
        rng: &mut R,
    ) -> Result<StoredFi, Rejection> {
        let (o, w) = (owner.name.clone(), writer.name.clone());
        let writer_pk = self.env.mit(&writer.hid()).map_err(|reason| Rejection {
            phase: Phase::Claim,
            reason,
        })?;
        let handoff = fi_create(owner, writer.hid(), &writer_pk.pk, scene, rng).map_err(|_| Rejection {
            phase: Phase::Claim,
            reason: RejectReason::Malformed,
        })?;
        let at = |phase: Phase| move |reason: RejectReason| Rejection { phase, reason };
        let Message::FiHandoff(handoff) = link
            .carry(&o, &w, &Message::FiHandoff(handoff))
            .map_err(at(Phase::Claim))?
        else {
            unreachable!("tag preserved")
        };

        let mut writer_sm = CtWriter::new(writer, handoff, owner_claim);
        let opened = writer_sm.open_scene(owner_pk)?;
        let mut contract_sm = ContractSession::new(&self.contract, &self.env);

        let claim = writer_sm.claim()?;
        let Message::CtClaim(claim) = link
            .carry(&w, CONTRACT_NAME, &Message::CtClaim(claim))
            .map_err(at(Phase::Challenge))?
        else {
            unreachable!("tag preserved")
        };
        let challenge = contract_sm.on_claim(&claim, rng).inspect_err(|r| {
            let _ = link.carry(CONTRACT_NAME, &w, &Message::Reject(r.reason));
        })?;
        let Message::CtChallenge(challenge) = link
            .carry(CONTRACT_NAME, &w, &Message::CtChallenge(challenge))
            .map_err(at(Phase::Response))?
        else {
            unreachable!("tag preserved")
        };
        let response = writer_sm.respond(&challenge, &self.env.contract_pk, rng)?;
        let response = match link.carry(&w, CONTRACT_NAME, &Message::CtResponse(response)) {
            Ok(Message::CtResponse(r)) => r,
            Ok(_) => unreachable!("tag preserved"),
            Err(reason) => return Err(at(Phase::Verify)(reason)),
        };
        let stored = contract_sm.on_response(&response).inspect_err(|r| {
            let _ = link.carry(CONTRACT_NAME, &w, &Message::Reject(r.reason));
        })?;
        link.carry(CONTRACT_NAME, &w, &Message::Stored(stored))
            .map_err(at(Phase::Done))?;
        drop(writer_sm);

        writer.recollections.insert(
            owner.hid(),
            Recollection {
                scene_digest: scene_digest(&opened),
            },
        );
        Ok(stored)
    }

    /// Mutual authentication: `a` proves to `b`, then `b` proves to `a`.
    /// First impressions are exchanged wherever none exists yet.
    pub fn meet<R: RngCore + CryptoRng>(
        &self,
        a: &mut Participant,
        b: &mut Participant,
        scene_a: &[u8],
        scene_b: &[u8],
        tamper: Option<Tamper>,
        rng: &mut R,
    ) -> Result<MeetReport, MeetFailure> {
        let mut link = match tamper {
            Some(t) => Link::with_tamper(t),
            None => Link::new(),
        };
        let fail = |prover: &Participant, verifier: &Participant, rejection, link: Link| MeetFailure {
            prover: prover.name.clone(),
            verifier: verifier.name.clone(),
            rejection,
            transcript: link.transcript,
        };
        let first = match self.authenticate(a, b, scene_a, &mut link, rng) {
            Ok(r) => r,
            Err(rej) => return Err(fail(a, b, rej, link)),
        };
        let second = match self.authenticate(b, a, scene_b, &mut link, rng) {
            Ok(r) => r,
            Err(rej) => return Err(fail(b, a, rej, link)),
        };
        let directions = vec![first, second];
        Ok(MeetReport {
            directions,
            transcript: link.transcript,
        })
    }
}

/// Bytes of the bundled sample scene (22.4 KiB).
pub const SAMPLE_SCENE_BYTES: usize = 22_938;

/// A deterministic stand-in for a captured first-impression image.
pub fn sample_scene(label: &str) -> Vec<u8> {
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;
    use sha2::{Digest, Sha256};

    let header = format!("SCENE-MARKER:{label}:");
    let mut out = header.into_bytes();
    let seed: [u8; 32] = Sha256::digest(&out).into();
    let start = out.len();
    out.resize(SAMPLE_SCENE_BYTES.max(start), 0);
    ChaCha20Rng::from_seed(seed).fill_bytes(&mut out[start..]);
    out
}

/// A Mid with random country, district and PSN fields.
pub fn random_mid<R: RngCore>(rng: &mut R) -> Mid {
    let date = 20_000_101 + (rng.next_u32() % 25) * 10_000 + (rng.next_u32() % 12) * 100 + rng.next_u32() % 28;
    Mid::build(
        rng.next_u32() % 1000,
        rng.next_u32() % 1_000_000,
        date,
        rng.next_u32() % 1_000_000,
    )
    .expect("fields within range")
}
