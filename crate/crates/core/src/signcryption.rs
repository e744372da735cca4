//! Chameleon signcryption with public verifiability.
//!
//! The sender opens its own chameleon hash `h_A` twice: once to the plaintext
//! (the opening travels encrypted inside `Z`) and once to `H3(K, Z, y_B)`
//! (the opening `R''` travels in the clear). The second opening lets anyone
//! holding `pk_A`, `h_A` and `pk_B` confirm who produced the ciphertext and
//! for whom, without decrypting it.
//!
//! Wire format of a [`Ciphertext`]:
//!
//! ```text
//! profile tag | n (u32 BE, bits) | K (48 B) | Z ((n + 384) / 8 B) | R'' (48 B)
//! ```
//!
//! and of a [`HybridEnvelope`]: `kem ciphertext | nonce (12 B) | dem`.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use rand_core::{CryptoRng, RngCore};
use zeroize::Zeroize;

use crate::chameleon::{check, opening, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::group::{h2, h3, Element, Scalar, ELEMENT_BITS, ELEMENT_BYTES};
use crate::wire::{self, Reader};

/// Bytes of the symmetric key carried by a hybrid envelope's KEM part.
pub const DEM_KEY_BYTES: usize = 16;
/// Bytes of the DEM nonce.
pub const DEM_NONCE_BYTES: usize = 12;

/// `(K, Z, R'')`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    /// `K = g^k`.
    pub ephemeral: Element,
    /// `Z = (M' || R') xor H2(K, y_B, y_B^k)`, exactly `n + l` bits.
    pub masked: Vec<u8>,
    /// `R''`, opening `h_A` to `H3(K, Z, y_B)`.
    pub check: Element,
}

impl Ciphertext {
    /// `n`, the plaintext bit length.
    pub fn message_bits(&self) -> usize {
        (self.masked.len() * 8).saturating_sub(ELEMENT_BITS)
    }

    pub fn encoded_len(&self) -> usize {
        1 + crate::group::PROFILE_NAME.len() + 4 + 2 * ELEMENT_BYTES + self.masked.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut Vec<u8>) {
        wire::put_profile_tag(out);
        wire::put_u32(out, self.message_bits() as u32);
        out.extend_from_slice(&self.ephemeral.encode());
        out.extend_from_slice(&self.masked);
        out.extend_from_slice(&self.check.encode());
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "ciphertext");
        let ct = Self::read(&mut r)?;
        r.finish()?;
        Ok(ct)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        r.profile_tag()?;
        let n = r.u32()? as usize;
        if n == 0 || !n.is_multiple_of(8) {
            return Err(Error::InvalidBitLength(n));
        }
        let ephemeral = r.element()?;
        let masked = r.take((n + ELEMENT_BITS) / 8)?.to_vec();
        let check = r.element()?;
        Ok(Ciphertext {
            ephemeral,
            masked,
            check,
        })
    }
}

/// A successfully de-signcrypted `(M', R')`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenedMessage {
    pub message: Vec<u8>,
    pub check: Element,
}

/// De-signcryption failed. Deliberately carries no cause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("de-signcryption failed")]
pub struct Failure;

fn xor_in_place(buf: &mut [u8], mask: &[u8]) {
    for (b, m) in buf.iter_mut().zip(mask) {
        *b ^= m;
    }
}

/// Signcrypts `message` from the holder of `sk_a` (whose avatar hash is
/// `h_a`) to `pk_b`.
pub fn sc<R: RngCore + CryptoRng>(
    sk_a: &SecretKey,
    h_a: &Element,
    message: &[u8],
    pk_b: &PublicKey,
    rng: &mut R,
) -> Result<Ciphertext> {
    if message.is_empty() {
        return Err(Error::EmptyMessage);
    }
    let k = Scalar::random_nonzero(rng);
    let ephemeral = Element::generator() * k;
    let y_b = pk_b.primary();

    let opened = opening(sk_a, h_a, message);
    let mut masked = Vec::with_capacity(message.len() + ELEMENT_BYTES);
    masked.extend_from_slice(message);
    masked.extend_from_slice(&opened.encode());
    let mask = h2(&ephemeral, &y_b, &(y_b * k), masked.len() * 8)?;
    xor_in_place(&mut masked, &mask);

    let digest = h3(&ephemeral, &masked, &y_b)?;
    let check = opening(sk_a, h_a, &digest);
    Ok(Ciphertext {
        ephemeral,
        masked,
        check,
    })
}

/// `R''` opens `h_a` to `H3(K, Z, y_B)` under `pk_a`.
fn ciphertext_bound(pk_a: &PublicKey, ct: &Ciphertext, h_a: &Element, y_b: &Element) -> bool {
    match h3(&ct.ephemeral, &ct.masked, y_b) {
        Ok(digest) => check(pk_a, h_a, &digest, &ct.check),
        Err(_) => false,
    }
}

/// Public verification: `(vid_message, vid_check)` is a valid opening of
/// `h_a` under `pk_a`, and the ciphertext was produced by `pk_a`'s holder for
/// `pk_b`. Uses no secret.
pub fn vc(
    pk_a: &PublicKey,
    ct: &Ciphertext,
    h_a: &Element,
    vid_message: &[u8],
    vid_check: &Element,
    pk_b: &PublicKey,
) -> bool {
    check(pk_a, h_a, vid_message, vid_check) && ciphertext_bound(pk_a, ct, h_a, &pk_b.primary())
}

/// De-signcryption by the receiver holding `sk_b`.
pub fn dsc(
    pk_a: &PublicKey,
    ct: &Ciphertext,
    h_a: &Element,
    sk_b: &SecretKey,
) -> std::result::Result<OpenedMessage, Failure> {
    let y_b = Element::generator() * *sk_b.scalar();
    if ct.masked.len() <= ELEMENT_BYTES || !ciphertext_bound(pk_a, ct, h_a, &y_b) {
        return Err(Failure);
    }
    let shared = ct.ephemeral * *sk_b.scalar();
    let mask = h2(&ct.ephemeral, &y_b, &shared, ct.masked.len() * 8).map_err(|_| Failure)?;
    let mut plain = ct.masked.clone();
    xor_in_place(&mut plain, &mask);
    let split = plain.len() - ELEMENT_BYTES;
    let opened = Element::decode(&plain[split..]).map_err(|_| Failure)?;
    plain.truncate(split);
    if !check(pk_a, h_a, &plain, &opened) {
        return Err(Failure);
    }
    Ok(OpenedMessage {
        message: plain,
        check: opened,
    })
}

/// Signcrypted 128-bit key plus AES-128-GCM encryption of the payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridEnvelope {
    pub kem: Ciphertext,
    pub nonce: [u8; DEM_NONCE_BYTES],
    /// Ciphertext and 16-byte tag; the KEM encoding is the associated data.
    pub dem: Vec<u8>,
}

impl HybridEnvelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.kem.encoded_len() + DEM_NONCE_BYTES + self.dem.len());
        self.kem.write(&mut out);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.dem);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "hybrid envelope");
        let kem = Ciphertext::read(&mut r)?;
        let nonce = r.array()?;
        let dem = r.take(r.remaining())?.to_vec();
        Ok(HybridEnvelope { kem, nonce, dem })
    }
}

pub fn seal_hybrid<R: RngCore + CryptoRng>(
    sk_a: &SecretKey,
    h_a: &Element,
    payload: &[u8],
    pk_b: &PublicKey,
    rng: &mut R,
) -> Result<HybridEnvelope> {
    let mut key = [0u8; DEM_KEY_BYTES];
    rng.fill_bytes(&mut key);
    let kem = sc(sk_a, h_a, &key, pk_b, rng)?;
    let mut nonce = [0u8; DEM_NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let aad = kem.to_bytes();
    let dem = Aes128Gcm::new_from_slice(&key)
        .expect("16-byte key")
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: payload, aad: &aad })
        .expect("in-memory AES-GCM encryption");
    key.zeroize();
    Ok(HybridEnvelope { kem, nonce, dem })
}

pub fn open_hybrid(
    pk_a: &PublicKey,
    env: &HybridEnvelope,
    h_a: &Element,
    sk_b: &SecretKey,
) -> std::result::Result<Vec<u8>, Failure> {
    let mut opened = dsc(pk_a, &env.kem, h_a, sk_b)?;
    if opened.message.len() != DEM_KEY_BYTES {
        return Err(Failure);
    }
    let aad = env.kem.to_bytes();
    let out = Aes128Gcm::new_from_slice(&opened.message)
        .map_err(|_| Failure)?
        .decrypt(Nonce::from_slice(&env.nonce), Payload { msg: &env.dem, aad: &aad })
        .map_err(|_| Failure);
    opened.message.zeroize();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chameleon::{hash, keygen, KeyPair};
    use crate::group::setup;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    struct Fx {
        a: KeyPair,
        b: KeyPair,
        h_a: Element,
        vid: (Vec<u8>, Element),
        rng: ChaCha20Rng,
    }

    fn fx() -> Fx {
        let params = setup(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let a = keygen(&params, &mut rng);
        let b = keygen(&params, &mut rng);
        let (h_a, r_a) = hash(a.public(), b"avatar-a", &mut rng);
        Fx {
            a,
            b,
            h_a,
            vid: (b"avatar-a".to_vec(), r_a),
            rng,
        }
    }

    #[test]
    fn roundtrip_and_public_verification() {
        let mut f = fx();
        let msg = [0xabu8; 16];
        let ct = sc(f.a.secret(), &f.h_a, &msg, f.b.public(), &mut f.rng).unwrap();
        assert_eq!(ct.message_bits(), 128);
        assert!(vc(f.a.public(), &ct, &f.h_a, &f.vid.0, &f.vid.1, f.b.public()));
        let opened = dsc(f.a.public(), &ct, &f.h_a, f.b.secret()).unwrap();
        assert_eq!(opened.message, msg);
        assert!(check(f.a.public(), &f.h_a, &opened.message, &opened.check));
    }

    #[test]
    fn fresh_ephemeral_per_call() {
        let mut f = fx();
        let c1 = sc(f.a.secret(), &f.h_a, b"x", f.b.public(), &mut f.rng).unwrap();
        let c2 = sc(f.a.secret(), &f.h_a, b"x", f.b.public(), &mut f.rng).unwrap();
        assert_ne!(c1.ephemeral, c2.ephemeral);
    }

    #[test]
    fn empty_message_rejected() {
        let mut f = fx();
        assert_eq!(
            sc(f.a.secret(), &f.h_a, b"", f.b.public(), &mut f.rng),
            Err(Error::EmptyMessage)
        );
    }

    #[test]
    fn wrong_receiver_cannot_open() {
        let mut f = fx();
        let params = setup(128).unwrap();
        let d = keygen(&params, &mut f.rng);
        let ct = sc(f.a.secret(), &f.h_a, b"secret", f.b.public(), &mut f.rng).unwrap();
        assert_eq!(dsc(f.a.public(), &ct, &f.h_a, d.secret()), Err(Failure));
        assert!(!vc(f.a.public(), &ct, &f.h_a, &f.vid.0, &f.vid.1, d.public()));
    }

    #[test]
    fn wire_roundtrip_and_length() {
        let mut f = fx();
        let ct = sc(f.a.secret(), &f.h_a, &[1u8; 32], f.b.public(), &mut f.rng).unwrap();
        let bytes = ct.to_bytes();
        assert_eq!(bytes.len(), ct.encoded_len());
        assert_eq!(Ciphertext::from_bytes(&bytes).unwrap(), ct);
        assert!(Ciphertext::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn hybrid_roundtrip_and_dem_tamper() {
        let mut f = fx();
        for len in [0usize, 1, 22_938] {
            let payload: Vec<u8> = (0..len).map(|i| (i * 31 % 251) as u8).collect();
            let env = seal_hybrid(f.a.secret(), &f.h_a, &payload, f.b.public(), &mut f.rng).unwrap();
            let parsed = HybridEnvelope::from_bytes(&env.to_bytes()).unwrap();
            assert_eq!(parsed, env);
            assert_eq!(open_hybrid(f.a.public(), &env, &f.h_a, f.b.secret()).unwrap(), payload);
        }
        let mut env = seal_hybrid(f.a.secret(), &f.h_a, b"scene", f.b.public(), &mut f.rng).unwrap();
        env.dem[0] ^= 1;
        assert_eq!(open_hybrid(f.a.public(), &env, &f.h_a, f.b.secret()), Err(Failure));
        assert!(vc(f.a.public(), &env.kem, &f.h_a, &f.vid.0, &f.vid.1, f.b.public()));
    }
}
