//! Chameleon hash and chameleon collision signatures.
//!
//! `h = H1(M) * y^r` with check value `R = g^r`. A triple `(h, M, R)` is
//! compatible with `y` iff `e(h / H1(M), g) = e(R, y)`. The holder of the
//! trapdoor `x` can open any `h` to any other message, and such a second
//! opening serves as a signature on it.

use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::error::{Error, Result};
use crate::group::{h1, pair, DualElement, Element, Scalar, SystemParams};
use crate::wire::{self, Reader};

/// A public key `y = g^x`, carried in both source groups.
pub type PublicKey = DualElement;

/// The trapdoor `x`. Never zero; wiped on drop.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop, Serialize, Deserialize)]
#[serde(try_from = "Scalar", into = "Scalar")]
pub struct SecretKey(Scalar);

impl SecretKey {
    pub fn from_scalar(x: Scalar) -> Result<Self> {
        if x.is_zero() {
            return Err(Error::ZeroScalar);
        }
        Ok(SecretKey(x))
    }

    pub fn scalar(&self) -> &Scalar {
        &self.0
    }

    pub fn public_key(&self) -> PublicKey {
        DualElement::from_scalar(&self.0)
    }

    fn inverse(&self) -> Scalar {
        self.0.invert().expect("secret key is nonzero")
    }
}

impl TryFrom<Scalar> for SecretKey {
    type Error = Error;
    fn try_from(x: Scalar) -> Result<Self> {
        SecretKey::from_scalar(x)
    }
}

impl From<SecretKey> for Scalar {
    fn from(sk: SecretKey) -> Scalar {
        sk.0
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SecretKey", into = "SecretKey")]
pub struct KeyPair {
    secret: SecretKey,
    public: PublicKey,
}

impl KeyPair {
    pub fn from_secret(secret: SecretKey) -> Self {
        let public = secret.public_key();
        KeyPair { secret, public }
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

impl TryFrom<SecretKey> for KeyPair {
    type Error = Error;
    fn try_from(sk: SecretKey) -> Result<Self> {
        Ok(KeyPair::from_secret(sk))
    }
}

impl From<KeyPair> for SecretKey {
    fn from(kp: KeyPair) -> SecretKey {
        kp.secret.clone()
    }
}

/// Samples `x` uniformly from [1, q) and returns `(x, g^x)`.
pub fn keygen<R: RngCore + CryptoRng>(params: &SystemParams, rng: &mut R) -> KeyPair {
    let x = Scalar::random_nonzero(rng);
    let public = *params.generator() * x;
    KeyPair {
        secret: SecretKey(x),
        public,
    }
}

/// `(h, M, R)`: a chameleon hash value, a message, and its check value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChameleonTriple {
    pub hash: Element,
    #[serde(with = "hex::serde")]
    pub message: Vec<u8>,
    pub check: Element,
}

impl ChameleonTriple {
    pub fn is_compatible(&self, pk: &PublicKey) -> bool {
        check(pk, &self.hash, &self.message, &self.check)
    }

    /// Profile tag, `h`, length-prefixed `M`, `R`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 20 + 48 + 4 + self.message.len() + 48);
        wire::put_profile_tag(&mut out);
        out.extend_from_slice(&self.hash.encode());
        wire::put_bytes(&mut out, &self.message);
        out.extend_from_slice(&self.check.encode());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "chameleon triple");
        r.profile_tag()?;
        let hash = r.element()?;
        let message = r.bytes()?.to_vec();
        let check = r.element()?;
        r.finish()?;
        Ok(ChameleonTriple {
            hash,
            message,
            check,
        })
    }
}

/// Chameleon hash of `message` under `pk` with fresh randomness.
pub fn hash<R: RngCore + CryptoRng>(pk: &PublicKey, message: &[u8], rng: &mut R) -> (Element, Element) {
    hash_with_randomness(pk, message, &Scalar::random(rng))
}

/// Chameleon hash with caller-chosen `r`: `(H1(M) * y^r, g^r)`.
pub fn hash_with_randomness(pk: &PublicKey, message: &[u8], r: &Scalar) -> (Element, Element) {
    let h = h1(message) + pk.primary() * *r;
    (h, Element::generator() * *r)
}

/// Compatibility of `(h, M, R)` with `pk`: `e(h / H1(M), g) == e(R, y)`.
pub fn check(pk: &PublicKey, h: &Element, message: &[u8], r: &Element) -> bool {
    pair(&(*h - h1(message)), &DualElement::generator()) == pair(r, pk)
}

/// `(h / H1(M))^(1/x)`: the check value opening `h` to `message`.
pub(crate) fn opening(sk: &SecretKey, h: &Element, message: &[u8]) -> Element {
    (*h - h1(message)) * sk.inverse()
}

/// Forges a check value opening `h` to `new_message`.
///
/// `(h, message, r)` must already be compatible with the key pair; the
/// collision formula itself ignores them.
pub fn collide(
    keys: &KeyPair,
    h: &Element,
    message: &[u8],
    r: &Element,
    new_message: &[u8],
) -> Result<Element> {
    if !check(keys.public(), h, message, r) {
        return Err(Error::IncompatibleTriple);
    }
    Ok(opening(keys.secret(), h, new_message))
}

/// Both `(h, M, R)` and `(h, M', R')` are compatible with `pk`.
pub fn verify_collision(
    pk: &PublicKey,
    h: &Element,
    message: &[u8],
    r: &Element,
    new_message: &[u8],
    new_r: &Element,
) -> bool {
    check(pk, h, message, r) && check(pk, h, new_message, new_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::setup;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn fixture() -> (SystemParams, KeyPair, ChaCha20Rng) {
        let params = setup(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let kp = keygen(&params, &mut rng);
        (params, kp, rng)
    }

    #[test]
    fn keygen_is_definitional() {
        let (_, kp, _) = fixture();
        assert_eq!(DualElement::from_scalar(kp.secret().scalar()), *kp.public());
        assert!(kp.public().is_consistent());
    }

    #[test]
    fn keygen_draws_distinct_keys() {
        let (params, _, mut rng) = fixture();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let kp = keygen(&params, &mut rng);
            assert!(seen.insert(kp.secret().scalar().to_bytes()));
        }
    }

    #[test]
    fn zero_secret_rejected() {
        assert_eq!(SecretKey::from_scalar(Scalar::zero()), Err(Error::ZeroScalar));
    }

    #[test]
    fn hash_then_check() {
        let (_, kp, mut rng) = fixture();
        let (h, r) = hash(kp.public(), b"visible identity", &mut rng);
        assert!(check(kp.public(), &h, b"visible identity", &r));
        let (h2, r2) = hash(kp.public(), b"visible identity", &mut rng);
        assert_ne!((h, r), (h2, r2));
        assert!(!check(kp.public(), &h, b"visible identitz", &r));
    }

    #[test]
    fn degenerate_randomness() {
        let (_, kp, _) = fixture();
        let (h, r) = hash_with_randomness(kp.public(), b"m", &Scalar::zero());
        assert_eq!(h, h1(b"m"));
        assert!(r.is_identity());
        assert!(check(kp.public(), &h, b"m", &r));
    }

    #[test]
    fn collide_to_same_message_is_identity_map() {
        let (_, kp, mut rng) = fixture();
        let (h, r) = hash(kp.public(), b"m", &mut rng);
        assert_eq!(collide(&kp, &h, b"m", &r, b"m").unwrap(), r);
    }

    #[test]
    fn collide_refuses_incompatible_triple() {
        let (params, kp, mut rng) = fixture();
        let other = keygen(&params, &mut rng);
        let (h, r) = hash(other.public(), b"m", &mut rng);
        assert_eq!(collide(&kp, &h, b"m", &r, b"x"), Err(Error::IncompatibleTriple));
    }

    #[test]
    fn collision_pairs_bind_to_their_hash() {
        let (_, kp, mut rng) = fixture();
        let (h1v, r1) = hash(kp.public(), b"m", &mut rng);
        let (h2v, r2) = hash(kp.public(), b"m", &mut rng);
        let c2 = collide(&kp, &h2v, b"m", &r2, b"n").unwrap();
        assert!(verify_collision(kp.public(), &h2v, b"m", &r2, b"n", &c2));
        assert!(!verify_collision(kp.public(), &h1v, b"m", &r1, b"n", &c2));
    }

    #[test]
    fn triple_roundtrip() {
        let (_, kp, mut rng) = fixture();
        let (h, r) = hash(kp.public(), b"hello", &mut rng);
        let t = ChameleonTriple {
            hash: h,
            message: b"hello".to_vec(),
            check: r,
        };
        assert_eq!(ChameleonTriple::from_bytes(&t.to_bytes()).unwrap(), t);
        assert!(t.is_compatible(kp.public()));
        let mut bytes = t.to_bytes();
        bytes.push(0);
        assert!(ChameleonTriple::from_bytes(&bytes).is_err());
    }
}
