//! User identity model: Mid, Hid, the IDP-signed MIT, avatars, and the
//! first-impression index.

use std::fmt;

use chrono::NaiveDate;
use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::biometric::IrisTemplate;
use crate::chameleon::{self, KeyPair, PublicKey};
use crate::error::{Error, Result};
use crate::group::Element;
use crate::wire::{self, Reader};

/// Digits in a rendered Mid: country 3, district 6, date 8, PSN 6.
pub const MID_DIGITS: usize = 23;
pub const HID_BYTES: usize = 32;

/// Metaverse identification number.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Mid(String);

impl Mid {
    pub fn build(country: u32, district: u32, date: u32, psn: u32) -> Result<Self> {
        if country > 999 || district > 999_999 || psn > 999_999 {
            return Err(Error::InvalidMid("field exceeds its digit width".into()));
        }
        Mid::parse(&format!("{country:03}{district:06}{date:08}{psn:06}"))
    }

    pub fn parse(digits: &str) -> Result<Self> {
        if digits.len() != MID_DIGITS {
            return Err(Error::InvalidMid(format!(
                "expected {MID_DIGITS} digits, got {}",
                digits.len()
            )));
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidMid("non-digit character".into()));
        }
        NaiveDate::parse_from_str(&digits[9..17], "%Y%m%d")
            .map_err(|_| Error::InvalidMid(format!("invalid date {}", &digits[9..17])))?;
        Ok(Mid(digits.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn country(&self) -> &str {
        &self.0[0..3]
    }

    pub fn district(&self) -> &str {
        &self.0[3..9]
    }

    pub fn date(&self) -> NaiveDate {
        NaiveDate::parse_from_str(&self.0[9..17], "%Y%m%d").expect("validated at construction")
    }

    pub fn psn(&self) -> &str {
        &self.0[17..23]
    }

    pub fn hid(&self) -> Hid {
        hid_derive(self)
    }
}

impl fmt::Display for Mid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Mid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mid({})", self.0)
    }
}

impl TryFrom<String> for Mid {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Mid::parse(&s)
    }
}

impl From<Mid> for String {
    fn from(m: Mid) -> String {
        m.0
    }
}

/// Anonymous identifier: SHA-256 of the Mid digit string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hid(#[serde(with = "hex::serde")] pub [u8; HID_BYTES]);

impl Hid {
    pub fn as_bytes(&self) -> &[u8; HID_BYTES] {
        &self.0
    }

    /// Fixed 64-character lowercase hex rendering.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let mut out = [0u8; HID_BYTES];
        hex::decode_to_slice(s, &mut out).map_err(|_| Error::InvalidEncoding("Hid hex"))?;
        Ok(Hid(out))
    }
}

impl fmt::Debug for Hid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hid({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Hid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn hid_derive(mid: &Mid) -> Hid {
    Hid(Sha256::digest(mid.as_str().as_bytes()).into())
}

/// `I_AB = Hid_A || Hid_B`: the scene's sender first, its receiver (and the
/// record's writer) second.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct FirstImpressionIndex {
    pub owner: Hid,
    pub writer: Hid,
}

impl FirstImpressionIndex {
    pub const BYTES: usize = 2 * HID_BYTES;

    pub fn new(owner: Hid, writer: Hid) -> Self {
        FirstImpressionIndex { owner, writer }
    }

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        out[..HID_BYTES].copy_from_slice(&self.owner.0);
        out[HID_BYTES..].copy_from_slice(&self.writer.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::BYTES {
            return Err(Error::InvalidLength {
                what: "first-impression index",
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        Ok(FirstImpressionIndex {
            owner: Hid(bytes[..HID_BYTES].try_into().expect("length checked")),
            writer: Hid(bytes[HID_BYTES..].try_into().expect("length checked")),
        })
    }
}

// ---------------------------------------------------------------------------
// Identity provider signatures

/// Signing half of an identity provider.
pub trait IssuerSigner {
    fn sign(&self, message: &[u8]) -> Vec<u8>;
}

/// Verification half of an identity provider.
pub trait IssuerVerifier {
    fn verify(&self, message: &[u8], signature: &[u8]) -> bool;
}

/// Ed25519 identity provider.
#[derive(Clone)]
pub struct Ed25519Issuer {
    key: SigningKey,
}

impl Ed25519Issuer {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Ed25519Issuer {
            key: SigningKey::from_bytes(&seed),
        }
    }

    pub fn from_seed(seed: &[u8; 32]) -> Self {
        Ed25519Issuer {
            key: SigningKey::from_bytes(seed),
        }
    }

    pub fn seed(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }
}

impl IssuerSigner for Ed25519Issuer {
    fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.key.sign(message).to_bytes().to_vec()
    }
}

impl IssuerVerifier for VerifyingKey {
    fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        match ed25519_dalek::Signature::from_slice(signature) {
            Ok(sig) => Verifier::verify(self, message, &sig).is_ok(),
            Err(_) => false,
        }
    }
}

// ---------------------------------------------------------------------------
// MIT

/// Metaverse identity token `(SN, Hid, pk, T)` plus the issuer's signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mit {
    pub serial: u64,
    pub hid: Hid,
    pub pk: PublicKey,
    pub template: IrisTemplate,
    pub issuer_sig: Vec<u8>,
}

impl Mit {
    /// The signed portion: profile tag, SN, Hid, pk, length-prefixed T.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let template = self.template.to_bytes();
        let mut out = Vec::with_capacity(64 + 144 + template.len());
        wire::put_profile_tag(&mut out);
        wire::put_u64(&mut out, self.serial);
        out.extend_from_slice(&self.hid.0);
        out.extend_from_slice(&self.pk.encode());
        wire::put_bytes(&mut out, &template);
        out
    }

    /// Canonical bytes followed by the length-prefixed signature.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.canonical_bytes();
        wire::put_bytes(&mut out, &self.issuer_sig);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "MIT");
        r.profile_tag()?;
        let serial = r.u64()?;
        let hid = Hid(r.array()?);
        let pk = r.dual_element()?;
        let template = IrisTemplate::from_bytes(r.bytes()?)?;
        let issuer_sig = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Mit {
            serial,
            hid,
            pk,
            template,
            issuer_sig,
        })
    }
}

pub fn mit_issue<S: IssuerSigner + ?Sized>(
    issuer: &S,
    serial: u64,
    mid: &Mid,
    pk: &PublicKey,
    template: &IrisTemplate,
) -> Mit {
    let mut mit = Mit {
        serial,
        hid: hid_derive(mid),
        pk: *pk,
        template: IrisTemplate {
            code: template.code.clone(),
            subject_seed: None,
        },
        issuer_sig: Vec::new(),
    };
    mit.issuer_sig = issuer.sign(&mit.canonical_bytes());
    mit
}

pub fn mit_verify<V: IssuerVerifier + ?Sized>(issuer: &V, mit: &Mit) -> bool {
    issuer.verify(&mit.canonical_bytes(), &mit.issuer_sig)
}

// ---------------------------------------------------------------------------
// Avatar

/// A message and its check value under some chameleon hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    #[serde(with = "hex::serde")]
    pub message: Vec<u8>,
    pub check: Element,
}

/// `(Hid, h, VID, PID)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Avatar {
    pub hid: Hid,
    pub hash: Element,
    /// Visible identity `M_a` and its check value `R_a`.
    pub vid: Opening,
    /// Physical identity: an iris sample opening the same hash.
    pub pid: Option<Opening>,
}

impl Avatar {
    /// VID, and PID when present, are compatible openings of `hash`.
    pub fn is_consistent(&self, pk: &PublicKey) -> bool {
        chameleon::check(pk, &self.hash, &self.vid.message, &self.vid.check)
            && self
                .pid
                .as_ref()
                .is_none_or(|p| chameleon::check(pk, &self.hash, &p.message, &p.check))
    }
}

/// `(h, R_a) <- Hash(pk, M_a)`.
pub fn avatar_create<R: RngCore + CryptoRng>(
    keys: &KeyPair,
    hid: Hid,
    visible: &[u8],
    rng: &mut R,
) -> Avatar {
    let (hash, check) = chameleon::hash(keys.public(), visible, rng);
    Avatar {
        hid,
        hash,
        vid: Opening {
            message: visible.to_vec(),
            check,
        },
        pid: None,
    }
}

/// Collides the avatar's hash onto `sample`, recording it as the PID.
pub fn pid_attach(avatar: &Avatar, keys: &KeyPair, sample: &[u8]) -> Result<Avatar> {
    let check = chameleon::collide(keys, &avatar.hash, &avatar.vid.message, &avatar.vid.check, sample)?;
    Ok(Avatar {
        pid: Some(Opening {
            message: sample.to_vec(),
            check,
        }),
        ..avatar.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biometric::enroll;
    use crate::chameleon::keygen;
    use crate::group::setup;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn sample_mid() -> Mid {
        Mid::build(156, 110105, 20240601, 301107).unwrap()
    }

    #[test]
    fn mid_render_and_fields() {
        let m = sample_mid();
        assert_eq!(m.as_str(), "15611010520240601301107");
        assert_eq!(m.country(), "156");
        assert_eq!(m.district(), "110105");
        assert_eq!(m.date(), NaiveDate::from_ymd_opt(2024, 6, 1).unwrap());
        assert_eq!(m.psn(), "301107");
        assert_eq!(Mid::parse(m.as_str()).unwrap(), m);
    }

    #[test]
    fn mid_rejections() {
        assert!(Mid::parse("1561101052024060130110").is_err());
        assert!(Mid::parse("156110105202406013011070").is_err());
        assert!(Mid::parse("1561101052024060130110a").is_err());
        assert!(Mid::parse("15611010520240230301107").is_err());
        assert!(Mid::build(1000, 1, 20240101, 1).is_err());
        assert!(Mid::build(156, 110105, 20230229, 1).is_err());
        assert!(Mid::build(156, 110105, 20240229, 1).is_ok());
    }

    #[test]
    fn hid_regression_vector() {
        // SHA-256("15611010520240601301107")
        assert_eq!(
            sample_mid().hid().to_hex(),
            "36cd1150f5005840b3aa1da566c4169b9119d13ac882412f377feea077bba59b"
        );
    }

    #[test]
    fn fi_index_direction() {
        let a = sample_mid().hid();
        let b = Mid::build(156, 110105, 20240601, 301108).unwrap().hid();
        let ab = FirstImpressionIndex::new(a, b);
        assert_ne!(ab.to_bytes(), FirstImpressionIndex::new(b, a).to_bytes());
        assert_eq!(FirstImpressionIndex::from_bytes(&ab.to_bytes()).unwrap(), ab);
        assert!(FirstImpressionIndex::from_bytes(&ab.to_bytes()[1..]).is_err());
    }

    #[test]
    fn mit_issue_verify_and_mutations() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let params = setup(128).unwrap();
        let idp = Ed25519Issuer::generate(&mut rng);
        let kp = keygen(&params, &mut rng);
        let mit = mit_issue(&idp, 7, &sample_mid(), kp.public(), &enroll(3));
        let vk = idp.verifying_key();
        assert!(mit_verify(&vk, &mit));
        assert_eq!(Mit::from_bytes(&mit.to_bytes()).unwrap(), mit);
        assert!(mit.to_bytes().len() <= 256 * 1024);

        let mut m = mit.clone();
        m.serial += 1;
        assert!(!mit_verify(&vk, &m));
        let mut m = mit.clone();
        m.hid.0[0] ^= 1;
        assert!(!mit_verify(&vk, &m));
        let mut m = mit.clone();
        m.pk = *keygen(&params, &mut rng).public();
        assert!(!mit_verify(&vk, &m));
        let mut m = mit.clone();
        m.template = enroll(4);
        assert!(!mit_verify(&vk, &m));
        let mut m = mit.clone();
        m.issuer_sig[5] ^= 1;
        assert!(!mit_verify(&vk, &m));
        let mut m = mit;
        m.issuer_sig.truncate(10);
        assert!(!mit_verify(&vk, &m));
    }

    #[test]
    fn avatar_vid_pid() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let params = setup(128).unwrap();
        let kp = keygen(&params, &mut rng);
        let hid = sample_mid().hid();
        let av = avatar_create(&kp, hid, b"blue fox", &mut rng);
        assert!(av.is_consistent(kp.public()));
        assert_ne!(avatar_create(&kp, hid, b"blue fox", &mut rng).hash, av.hash);
        assert!(avatar_create(&kp, hid, b"", &mut rng).is_consistent(kp.public()));

        let with_pid = pid_attach(&av, &kp, b"iris sample 1").unwrap();
        let pid = with_pid.pid.clone().unwrap();
        assert!(chameleon::verify_collision(
            kp.public(),
            &av.hash,
            &av.vid.message,
            &av.vid.check,
            &pid.message,
            &pid.check
        ));
        let second = pid_attach(&with_pid, &kp, b"iris sample 2").unwrap();
        assert!(second.is_consistent(kp.public()));

        let other = avatar_create(&kp, hid, b"red fox", &mut rng);
        assert!(!chameleon::check(kp.public(), &other.hash, &pid.message, &pid.check));

        let stranger = keygen(&params, &mut rng);
        assert_eq!(
            pid_attach(&av, &stranger, b"x"),
            Err(Error::IncompatibleTriple)
        );
    }
}
