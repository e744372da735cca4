//! Protocol messages, framing and transcripts.
//!
//! A frame is a one-byte phase tag, a 32-bit big-endian payload length, and
//! the payload.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::Element;
use crate::identity::{FirstImpressionIndex, Hid, Opening, HID_BYTES};
use crate::ledger::ContentId;
use crate::signcryption::{Ciphertext, HybridEnvelope};
use crate::wire::{self, Reader};

use super::RejectReason;

pub const NONCE_BYTES: usize = 16;

/// Frame tags.
pub mod tag {
    pub const CLAIM: u8 = 0x01;
    pub const CHALLENGE: u8 = 0x02;
    pub const RESPONSE: u8 = 0x03;
    pub const HANDSHAKE: u8 = 0x04;
    pub const FI_HANDOFF: u8 = 0x10;
    pub const CT_CLAIM: u8 = 0x11;
    pub const CT_CHALLENGE: u8 = 0x12;
    pub const CT_RESPONSE: u8 = 0x13;
    pub const STORED: u8 = 0x14;
    pub const REJECT: u8 = 0x0f;
}

/// `{Hid_A, h_A, VID_A}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub hid: Hid,
    pub hash: Element,
    pub vid: Opening,
}

/// A fresh 128-bit challenge, flagged when no first impression exists yet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChallengeMsg {
    pub nonce: [u8; NONCE_BYTES],
    pub first_meeting: bool,
}

/// `CT_A'`: the marked iris sample signcrypted to the verifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseMsg {
    pub ct: Ciphertext,
}

/// `g^w`, plus the instruction to create a first impression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handshake {
    pub gw: Element,
    pub create_fi: bool,
}

/// `{I_AB, CT_AB}` from the scene's owner to its writer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiHandoff {
    pub index: FirstImpressionIndex,
    pub envelope: HybridEnvelope,
}

/// `{I_AB, CT_AB, h_A, VID_A}` sent by the writer to the contract.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtClaim {
    pub index: Vec<u8>,
    pub envelope: HybridEnvelope,
    pub owner_hash: Element,
    pub owner_vid: Opening,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtChallenge {
    pub nonce: [u8; NONCE_BYTES],
}

/// `{CT_B', h_B}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtResponse {
    pub ct: Ciphertext,
    pub writer_hash: Element,
}

/// Handles of a stored first impression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StoredFi {
    pub index: FirstImpressionIndex,
    pub fid: ContentId,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Claim(Claim),
    Challenge(ChallengeMsg),
    Response(ResponseMsg),
    Handshake(Handshake),
    FiHandoff(FiHandoff),
    CtClaim(CtClaim),
    CtChallenge(CtChallenge),
    CtResponse(CtResponse),
    Stored(StoredFi),
    Reject(RejectReason),
}

fn put_opening(out: &mut Vec<u8>, o: &Opening) {
    wire::put_bytes(out, &o.message);
    out.extend_from_slice(&o.check.encode());
}

fn read_opening(r: &mut Reader<'_>) -> Result<Opening> {
    let message = r.bytes()?.to_vec();
    let check = r.element()?;
    Ok(Opening { message, check })
}

fn read_flag(r: &mut Reader<'_>) -> Result<bool> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::InvalidEncoding("flag byte")),
    }
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Claim(_) => tag::CLAIM,
            Message::Challenge(_) => tag::CHALLENGE,
            Message::Response(_) => tag::RESPONSE,
            Message::Handshake(_) => tag::HANDSHAKE,
            Message::FiHandoff(_) => tag::FI_HANDOFF,
            Message::CtClaim(_) => tag::CT_CLAIM,
            Message::CtChallenge(_) => tag::CT_CHALLENGE,
            Message::CtResponse(_) => tag::CT_RESPONSE,
            Message::Stored(_) => tag::STORED,
            Message::Reject(_) => tag::REJECT,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::Claim(c) => {
                out.extend_from_slice(c.hid.as_bytes());
                out.extend_from_slice(&c.hash.encode());
                put_opening(&mut out, &c.vid);
            }
            Message::Challenge(c) => {
                out.extend_from_slice(&c.nonce);
                out.push(c.first_meeting as u8);
            }
            Message::Response(r) => out = r.ct.to_bytes(),
            Message::Handshake(h) => {
                out.extend_from_slice(&h.gw.encode());
                out.push(h.create_fi as u8);
            }
            Message::FiHandoff(f) => {
                out.extend_from_slice(&f.index.to_bytes());
                wire::put_bytes(&mut out, &f.envelope.to_bytes());
            }
            Message::CtClaim(c) => {
                wire::put_bytes(&mut out, &c.index);
                wire::put_bytes(&mut out, &c.envelope.to_bytes());
                out.extend_from_slice(&c.owner_hash.encode());
                put_opening(&mut out, &c.owner_vid);
            }
            Message::CtChallenge(c) => out.extend_from_slice(&c.nonce),
            Message::CtResponse(r) => {
                wire::put_bytes(&mut out, &r.ct.to_bytes());
                out.extend_from_slice(&r.writer_hash.encode());
            }
            Message::Stored(s) => {
                out.extend_from_slice(&s.index.to_bytes());
                out.extend_from_slice(&s.fid.0);
                wire::put_u64(&mut out, s.seq);
            }
            Message::Reject(reason) => out.push(reason.code()),
        }
        out
    }

    pub fn decode_payload(tag: u8, payload: &[u8]) -> Result<Self> {
        let mut r = Reader::new(payload, "message");
        let msg = match tag {
            tag::CLAIM => Message::Claim(Claim {
                hid: Hid(r.array::<HID_BYTES>()?),
                hash: r.element()?,
                vid: read_opening(&mut r)?,
            }),
            tag::CHALLENGE => Message::Challenge(ChallengeMsg {
                nonce: r.array()?,
                first_meeting: read_flag(&mut r)?,
            }),
            tag::RESPONSE => Message::Response(ResponseMsg {
                ct: Ciphertext::from_bytes(r.take(r.remaining())?)?,
            }),
            tag::HANDSHAKE => Message::Handshake(Handshake {
                gw: r.element()?,
                create_fi: read_flag(&mut r)?,
            }),
            tag::FI_HANDOFF => Message::FiHandoff(FiHandoff {
                index: FirstImpressionIndex::from_bytes(r.take(FirstImpressionIndex::BYTES)?)?,
                envelope: HybridEnvelope::from_bytes(r.bytes()?)?,
            }),
            tag::CT_CLAIM => Message::CtClaim(CtClaim {
                index: r.bytes()?.to_vec(),
                envelope: HybridEnvelope::from_bytes(r.bytes()?)?,
                owner_hash: r.element()?,
                owner_vid: read_opening(&mut r)?,
            }),
            tag::CT_CHALLENGE => Message::CtChallenge(CtChallenge { nonce: r.array()? }),
            tag::CT_RESPONSE => Message::CtResponse(CtResponse {
                ct: Ciphertext::from_bytes(r.bytes()?)?,
                writer_hash: r.element()?,
            }),
            tag::STORED => Message::Stored(StoredFi {
                index: FirstImpressionIndex::from_bytes(r.take(FirstImpressionIndex::BYTES)?)?,
                fid: ContentId(r.array()?),
                seq: r.u64()?,
            }),
            tag::REJECT => Message::Reject(
                RejectReason::from_code(r.u8()?).ok_or(Error::InvalidEncoding("reject code"))?,
            ),
            _ => return Err(Error::InvalidEncoding("unknown message tag")),
        };
        r.finish()?;
        Ok(msg)
    }

    /// Tag, length, payload.
    pub fn to_frame(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(5 + payload.len());
        out.push(self.tag());
        wire::put_u32(&mut out, payload.len() as u32);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_frame(frame: &[u8]) -> Result<Self> {
        let mut r = Reader::new(frame, "frame");
        let tag = r.u8()?;
        let payload = r.bytes()?;
        r.finish()?;
        Self::decode_payload(tag, payload)
    }
}

/// Writes one frame to a byte stream.
pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&msg.to_frame())?;
    w.flush()
}

/// Reads one frame from a byte stream.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Message> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    let len = u32::from_be_bytes(head[1..].try_into().expect("4 bytes")) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Message::decode_payload(head[0], &payload).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub tag: u8,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
}

/// Every frame that crossed the wire, in order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn record(&mut self, from: &str, to: &str, tag: u8, payload: &[u8]) {
        self.entries.push(TranscriptEntry {
            seq: self.entries.len() as u64 + 1,
            from: from.to_string(),
            to: to.to_string(),
            tag,
            payload: payload.to_vec(),
        });
    }

    /// `seq direction tag hex-payload`, one line per message.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} {}->{} {:02x} {}",
                e.seq,
                e.from,
                e.to,
                e.tag,
                hex::encode(&e.payload)
            );
        }
        out
    }

    /// All payload bytes, concatenated.
    pub fn wire_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|e| e.payload.iter().copied()).collect()
    }

    pub fn extend(&mut self, other: Transcript) {
        for e in other.entries {
            self.record(&e.from, &e.to, e.tag, &e.payload);
        }
    }
}
