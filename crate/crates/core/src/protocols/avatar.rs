//! Avatar authentication: a prover shows that the avatar in front of the
//! verifier is backed by the registered owner of its Hid, and the verifier
//! recalls the first impression it stored for that owner, if any.

use rand_core::{CryptoRng, RngCore};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::biometric::{self, MarkedSample};
use crate::chameleon::{self, PublicKey};
use crate::group::{Element, Scalar};
use crate::identity::{FirstImpressionIndex, Hid, Mit};
use crate::signcryption::{dsc, open_hybrid, sc};

use super::messages::{ChallengeMsg, Claim, Handshake, ResponseMsg};
use super::world::{Environment, Participant};
use super::{Challenge, Phase, RejectReason, Rejection, SessionKey};

/// What the verifier concluded about its history with the prover.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Recall {
    /// No first impression stored for this pair.
    FirstMeeting,
    /// The stored scene opened and matched the verifier's recollection.
    Recognized {
        #[serde(with = "hex::serde")]
        scene_digest: [u8; 32],
    },
}

pub fn scene_digest(scene: &[u8]) -> [u8; 32] {
    Sha256::digest(scene).into()
}

/// Prover side, held by the avatar's owner.
pub struct AvatarProver<'a> {
    me: &'a Participant,
    env: &'a Environment,
    verifier: Hid,
    phase: Phase,
}

impl<'a> AvatarProver<'a> {
    pub fn new(me: &'a Participant, env: &'a Environment, verifier: Hid) -> Self {
        AvatarProver {
            me,
            env,
            verifier,
            phase: Phase::Claim,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn fail(&mut self, reason: RejectReason) -> Rejection {
        let phase = self.phase;
        self.phase = Phase::Failed;
        Rejection { phase, reason }
    }

    pub fn claim(&mut self) -> Result<Claim, Rejection> {
        if self.phase != Phase::Claim {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Challenge;
        Ok(Claim {
            hid: self.me.avatar.hid,
            hash: self.me.avatar.hash,
            vid: self.me.avatar.vid.clone(),
        })
    }

    /// Captures a live sample, marks it with the challenge and signcrypts it
    /// to the verifier.
    pub fn respond<R: RngCore + CryptoRng>(
        &mut self,
        challenge: &ChallengeMsg,
        rng: &mut R,
    ) -> Result<ResponseMsg, Rejection> {
        if self.phase != Phase::Challenge {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        let verifier_mit = match self.env.mit(&self.verifier) {
            Ok(m) => m,
            Err(r) => return Err(self.fail(r)),
        };
        let live = biometric::sample(&self.me.iris(), self.me.noise_rate, rng)
            .map_err(|_| self.fail(RejectReason::Malformed))?;
        let marked = biometric::embed(&live, &challenge.nonce).to_bytes();
        let ct = sc(
            self.me.keys.secret(),
            &self.me.avatar.hash,
            &marked,
            &verifier_mit.pk,
            rng,
        )
        .map_err(|_| self.fail(RejectReason::Malformed))?;
        self.phase = Phase::Verify;
        Ok(ResponseMsg { ct })
    }

    /// `K_w = (g^w)^{x_A}`.
    pub fn finish(&mut self, handshake: &Handshake) -> Result<SessionKey, Rejection> {
        if self.phase != Phase::Verify {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Done;
        Ok(SessionKey::from_shared(handshake.gw * *self.me.keys.secret().scalar()))
    }
}

/// Verifier side.
pub struct AvatarVerifier<'a> {
    me: &'a Participant,
    env: &'a Environment,
    phase: Phase,
    claim: Option<Claim>,
    mit: Option<Mit>,
    pending: Option<Challenge>,
    recall: Option<Recall>,
    scene: Option<Vec<u8>>,
    session: Option<SessionKey>,
}

impl<'a> AvatarVerifier<'a> {
    pub fn new(me: &'a Participant, env: &'a Environment) -> Self {
        AvatarVerifier {
            me,
            env,
            phase: Phase::Claim,
            claim: None,
            mit: None,
            pending: None,
            recall: None,
            scene: None,
            session: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn recall(&self) -> Option<&Recall> {
        self.recall.as_ref()
    }

    /// The first-impression scene opened during the claim phase.
    pub fn recalled_scene(&self) -> Option<&[u8]> {
        self.scene.as_deref()
    }

    pub fn session_key(&self) -> Option<&SessionKey> {
        self.session.as_ref()
    }

    /// The prover's public key, once its MIT has been accepted.
    pub fn prover_key(&self) -> Option<&PublicKey> {
        self.mit.as_ref().map(|m| &m.pk)
    }

    fn fail(&mut self, reason: RejectReason) -> Rejection {
        let phase = self.phase;
        self.phase = Phase::Failed;
        self.pending = None;
        Rejection { phase, reason }
    }

    /// MIT lookup, VID check, first-impression recall, then a fresh
    /// challenge.
    pub fn on_claim<R: RngCore + CryptoRng>(
        &mut self,
        claim: &Claim,
        rng: &mut R,
    ) -> Result<ChallengeMsg, Rejection> {
        if self.phase != Phase::Claim {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Challenge;
        let mit = self.env.mit(&claim.hid).map_err(|r| self.fail(r))?;
        if !chameleon::check(&mit.pk, &claim.hash, &claim.vid.message, &claim.vid.check) {
            return Err(self.fail(RejectReason::VidCheck));
        }

        let index = FirstImpressionIndex::new(claim.hid, self.me.hid());
        let recall = match self.env.fi_envelope(&index).map_err(|r| self.fail(r))? {
            None => Recall::FirstMeeting,
            Some(envelope) => {
                let scene = open_hybrid(&mit.pk, &envelope, &claim.hash, self.me.keys.secret())
                    .map_err(|_| self.fail(RejectReason::FiDecrypt))?;
                let digest = scene_digest(&scene);
                let remembered = self.me.recollections.get(&claim.hid).map(|r| r.scene_digest);
                if remembered != Some(digest) {
                    return Err(self.fail(RejectReason::RecallMismatch));
                }
                self.scene = Some(scene);
                Recall::Recognized { scene_digest: digest }
            }
        };

        let challenge = Challenge::fresh(rng);
        let msg = ChallengeMsg {
            nonce: challenge.bits,
            first_meeting: recall == Recall::FirstMeeting,
        };
        self.pending = Some(challenge);
        self.recall = Some(recall);
        self.claim = Some(claim.clone());
        self.mit = Some(mit);
        self.phase = Phase::Response;
        Ok(msg)
    }

    /// De-signcrypts the marked sample, checks freshness, the collision with
    /// the VID and the biometric match, then answers with `g^w`.
    pub fn on_response<R: RngCore + CryptoRng>(
        &mut self,
        response: &ResponseMsg,
        rng: &mut R,
    ) -> Result<Handshake, Rejection> {
        if self.phase != Phase::Response {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Verify;
        let claim = self.claim.clone().expect("set with the challenge");
        let pk = self.mit.as_ref().expect("set with the challenge").pk;

        let opened = dsc(&pk, &response.ct, &claim.hash, self.me.keys.secret())
            .map_err(|_| self.fail(RejectReason::DscFailure))?;
        let marked = MarkedSample::from_bytes(&opened.message).map_err(|_| self.fail(RejectReason::Malformed))?;
        let (live, mark) = biometric::extract(&marked);
        let challenge = self.pending.take().expect("set with the challenge");
        if mark != challenge.bits {
            return Err(self.fail(RejectReason::StaleChallenge));
        }
        if !chameleon::verify_collision(
            &pk,
            &claim.hash,
            &claim.vid.message,
            &claim.vid.check,
            &opened.message,
            &opened.check,
        ) {
            return Err(self.fail(RejectReason::CollisionMismatch));
        }
        let template = &self.mit.as_ref().expect("set with the challenge").template;
        if !self.env.matcher.matches(&live.code, template).unwrap_or(false) {
            return Err(self.fail(RejectReason::BiometricMismatch));
        }

        let w = Scalar::random_nonzero(rng);
        let gw = Element::generator() * w;
        self.session = Some(SessionKey::from_shared(pk.primary() * w));
        self.phase = Phase::Done;
        Ok(Handshake {
            gw,
            create_fi: self.recall == Some(Recall::FirstMeeting),
        })
    }
}
