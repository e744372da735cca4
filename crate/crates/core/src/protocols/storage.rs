//! Ciphertext authentication: the writer of a first impression proves to
//! the storage contract that it may store the owner's envelope under
//! `I_AB`, and the contract publicly verifies the envelope before storing.

use rand_core::{CryptoRng, RngCore};

use crate::chameleon::PublicKey;
use crate::error::Result;
use crate::identity::{FirstImpressionIndex, Hid, Opening};
use crate::group::Element;
use crate::ledger::{Namespace, StoreError};
use crate::signcryption::{dsc, open_hybrid, sc, seal_hybrid, vc, HybridEnvelope};

use super::messages::{Claim, CtChallenge, CtClaim, CtResponse, FiHandoff, StoredFi};
use super::world::{Contract, Environment, Participant};
use super::{Challenge, Phase, RejectReason, Rejection};

/// A first impression on its way from its owner to its writer.
pub type FirstImpressionHandoff = FiHandoff;

/// Seals `scene` from `owner` to the writer and names it `I_{owner,writer}`.
pub fn fi_create<R: RngCore + CryptoRng>(
    owner: &Participant,
    writer: Hid,
    writer_pk: &PublicKey,
    scene: &[u8],
    rng: &mut R,
) -> Result<FirstImpressionHandoff> {
    let envelope = seal_hybrid(owner.keys.secret(), &owner.avatar.hash, scene, writer_pk, rng)?;
    Ok(FiHandoff {
        index: FirstImpressionIndex::new(owner.hid(), writer),
        envelope,
    })
}

/// Writer side, run by the receiver of a first impression.
pub struct CtWriter<'a> {
    me: &'a Participant,
    handoff: FiHandoff,
    owner_hash: Element,
    owner_vid: Opening,
    phase: Phase,
}

impl<'a> CtWriter<'a> {
    /// `owner` is the claim the owner authenticated with.
    pub fn new(me: &'a Participant, handoff: FiHandoff, owner: &Claim) -> Self {
        CtWriter {
            me,
            handoff,
            owner_hash: owner.hash,
            owner_vid: owner.vid.clone(),
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

    /// Checks the handoff is addressed to this writer and opens the scene.
    pub fn open_scene(&mut self, owner_pk: &PublicKey) -> std::result::Result<Vec<u8>, Rejection> {
        if self.handoff.index.writer != self.me.hid() {
            return Err(self.fail(RejectReason::IndexParse));
        }
        open_hybrid(owner_pk, &self.handoff.envelope, &self.owner_hash, self.me.keys.secret())
            .map_err(|_| self.fail(RejectReason::FiDecrypt))
    }

    pub fn claim(&mut self) -> std::result::Result<CtClaim, Rejection> {
        if self.phase != Phase::Claim {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Challenge;
        Ok(CtClaim {
            index: self.handoff.index.to_bytes().to_vec(),
            envelope: self.handoff.envelope.clone(),
            owner_hash: self.owner_hash,
            owner_vid: self.owner_vid.clone(),
        })
    }

    /// `CT_B' = SC(x_B, h_B, C_b, y_S)`.
    pub fn respond<R: RngCore + CryptoRng>(
        &mut self,
        challenge: &CtChallenge,
        contract_pk: &PublicKey,
        rng: &mut R,
    ) -> std::result::Result<CtResponse, Rejection> {
        if self.phase != Phase::Challenge {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        let ct = sc(self.me.keys.secret(), &self.me.avatar.hash, &challenge.nonce, contract_pk, rng)
            .map_err(|_| self.fail(RejectReason::Malformed))?;
        self.phase = Phase::Verify;
        Ok(CtResponse {
            ct,
            writer_hash: self.me.avatar.hash,
        })
    }
}

/// Contract side of one storage request.
pub struct ContractSession<'a> {
    contract: &'a Contract,
    env: &'a Environment,
    phase: Phase,
    request: Option<(FirstImpressionIndex, HybridEnvelope)>,
    writer_pk: Option<PublicKey>,
    pending: Option<Challenge>,
}

impl<'a> ContractSession<'a> {
    pub fn new(contract: &'a Contract, env: &'a Environment) -> Self {
        ContractSession {
            contract,
            env,
            phase: Phase::Claim,
            request: None,
            writer_pk: None,
            pending: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn fail(&mut self, reason: RejectReason) -> Rejection {
        let phase = self.phase;
        self.phase = Phase::Failed;
        self.pending = None;
        Rejection { phase, reason }
    }

    /// Parses `I_AB`, fetches both MITs and publicly verifies the envelope
    /// with `VC` before issuing a challenge.
    pub fn on_claim<R: RngCore + CryptoRng>(
        &mut self,
        claim: &CtClaim,
        rng: &mut R,
    ) -> std::result::Result<CtChallenge, Rejection> {
        if self.phase != Phase::Claim {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Challenge;
        let index = FirstImpressionIndex::from_bytes(&claim.index).map_err(|_| self.fail(RejectReason::IndexParse))?;
        let owner = self.env.mit(&index.owner).map_err(|r| self.fail(r))?;
        let writer = self.env.mit(&index.writer).map_err(|r| self.fail(r))?;
        if !vc(
            &owner.pk,
            &claim.envelope.kem,
            &claim.owner_hash,
            &claim.owner_vid.message,
            &claim.owner_vid.check,
            &writer.pk,
        ) {
            return Err(self.fail(RejectReason::VcFalse));
        }
        let challenge = Challenge::fresh(rng);
        self.pending = Some(challenge);
        self.request = Some((index, claim.envelope.clone()));
        self.writer_pk = Some(writer.pk);
        self.phase = Phase::Response;
        Ok(CtChallenge { nonce: challenge.bits })
    }

    /// De-signcrypts `CT_B'`, compares it with the challenge and, on success,
    /// stores the envelope and indexes it.
    pub fn on_response(&mut self, response: &CtResponse) -> std::result::Result<StoredFi, Rejection> {
        if self.phase != Phase::Response {
            return Err(self.fail(RejectReason::OutOfOrder));
        }
        self.phase = Phase::Verify;
        let writer_pk = self.writer_pk.expect("set with the challenge");
        let opened = dsc(&writer_pk, &response.ct, &response.writer_hash, self.contract.keys.secret())
            .map_err(|_| self.fail(RejectReason::DscFailure))?;
        let challenge = self.pending.take().expect("set with the challenge");
        if opened.message != challenge.bits {
            return Err(self.fail(RejectReason::StaleChallenge));
        }
        let (index, envelope) = self.request.take().expect("set with the challenge");
        let stored = self.env.store.write().put_indexed(
            Namespace::FiIndex,
            Namespace::FiContent,
            &index.to_bytes(),
            &envelope.to_bytes(),
        );
        match stored {
            Ok((fid, seq)) => {
                self.phase = Phase::Done;
                Ok(StoredFi { index, fid, seq })
            }
            Err(StoreError::DuplicateKey(_)) => Err(self.fail(RejectReason::AlreadyWritten)),
            Err(_) => Err(self.fail(RejectReason::Storage)),
        }
    }
}
