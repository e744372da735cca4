//! Avatar authentication and ciphertext authentication.
//!
//! Both protocols are written as explicit per-party state machines that
//! consume and produce [`Message`]s. [`world`] wires the parties together
//! over an in-process link that frames, logs and optionally tampers with
//! every message.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::group::Element;

pub mod avatar;
pub mod messages;
pub mod storage;
pub mod world;

pub use avatar::{AvatarProver, AvatarVerifier, Recall};
pub use messages::{Message, Transcript};
pub use storage::{ContractSession, CtWriter, FirstImpressionHandoff};
pub use world::{Contract, Environment, IdentityProvider, Participant, World};

const SESSION_TAG: &[u8] = b"CHSC-V01-SESSION";

/// Why a protocol run was refused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    MitMissing,
    MitInvalid,
    VidCheck,
    FiDecrypt,
    RecallMismatch,
    DscFailure,
    StaleChallenge,
    CollisionMismatch,
    BiometricMismatch,
    IndexParse,
    VcFalse,
    AlreadyWritten,
    Storage,
    Malformed,
    OutOfOrder,
}

impl RejectReason {
    pub const ALL: [RejectReason; 15] = [
        RejectReason::MitMissing,
        RejectReason::MitInvalid,
        RejectReason::VidCheck,
        RejectReason::FiDecrypt,
        RejectReason::RecallMismatch,
        RejectReason::DscFailure,
        RejectReason::StaleChallenge,
        RejectReason::CollisionMismatch,
        RejectReason::BiometricMismatch,
        RejectReason::IndexParse,
        RejectReason::VcFalse,
        RejectReason::AlreadyWritten,
        RejectReason::Storage,
        RejectReason::Malformed,
        RejectReason::OutOfOrder,
    ];

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code.checked_sub(1)? as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::MitMissing => "mit-missing",
            RejectReason::MitInvalid => "mit-invalid",
            RejectReason::VidCheck => "vid-check",
            RejectReason::FiDecrypt => "fi-decrypt",
            RejectReason::RecallMismatch => "recall-mismatch",
            RejectReason::DscFailure => "dsc-failure",
            RejectReason::StaleChallenge => "stale-challenge",
            RejectReason::CollisionMismatch => "collision-mismatch",
            RejectReason::BiometricMismatch => "biometric-mismatch",
            RejectReason::IndexParse => "index-parse",
            RejectReason::VcFalse => "vc-false",
            RejectReason::AlreadyWritten => "already-written",
            RejectReason::Storage => "storage",
            RejectReason::Malformed => "malformed",
            RejectReason::OutOfOrder => "out-of-order",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for RejectReason {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Where a party's state machine stands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Claim,
    Challenge,
    Response,
    Verify,
    Done,
    Failed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Claim => "claim",
            Phase::Challenge => "challenge",
            Phase::Response => "response",
            Phase::Verify => "verify",
            Phase::Done => "done",
            Phase::Failed => "failed",
        })
    }
}

/// A rejection and the phase that raised it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub phase: Phase,
    pub reason: RejectReason,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rejected at {}: {}", self.phase, self.reason)
    }
}

impl std::error::Error for Rejection {}

static CHALLENGE_SEQ: AtomicU64 = AtomicU64::new(1);

/// An outstanding challenge and the order it was issued in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Challenge {
    pub bits: [u8; messages::NONCE_BYTES],
    pub issued_at: u64,
}

impl Challenge {
    pub fn fresh<R: rand_core::RngCore>(rng: &mut R) -> Self {
        let mut bits = [0u8; messages::NONCE_BYTES];
        rng.fill_bytes(&mut bits);
        Challenge {
            bits,
            issued_at: CHALLENGE_SEQ.fetch_add(1, Ordering::Relaxed),
        }
    }
}

/// `K_w = g^{x_A w}` and the symmetric key derived from it.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey {
    pub shared: Element,
    pub transport: [u8; 32],
}

impl SessionKey {
    pub fn from_shared(shared: Element) -> Self {
        let mut h = Sha256::new();
        h.update(SESSION_TAG);
        h.update(shared.encode());
        SessionKey {
            shared,
            transport: h.finalize().into(),
        }
    }

    /// Short public identifier, safe to log.
    pub fn fingerprint(&self) -> String {
        hex::encode(&Sha256::digest(&self.transport[..])[..8])
    }
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey({})", self.fingerprint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::SeedableRng;

    #[test]
    fn reason_codes_roundtrip() {
        for r in RejectReason::ALL {
            assert_eq!(RejectReason::from_code(r.code()), Some(r));
        }
        assert_eq!(RejectReason::from_code(0), None);
        assert_eq!(RejectReason::from_code(16), None);
        assert_eq!(RejectReason::DscFailure.to_string(), "dsc-failure");
    }

    #[test]
    fn challenges_are_ordered() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let a = Challenge::fresh(&mut rng);
        let b = Challenge::fresh(&mut rng);
        assert!(b.issued_at > a.issued_at);
        assert_ne!(a.bits, b.bits);
    }
}
