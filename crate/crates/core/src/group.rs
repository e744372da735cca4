//! The prime-order bilinear group, its scalar field, and the three hash
//! functions everything else is built on.
//!
//! The backend is BLS12-381 and group operations are written additively, as
//! in the backend: `a + b` is the group law, `a - b` is division and `a * s`
//! is exponentiation by the scalar `s`.
//!
//! The scheme is stated over a symmetric pairing. Only the generator and
//! public keys ever sit in the second pairing slot, so those are
//! [`DualElement`]s carrying a G2 half with the same discrete log, and every
//! other element (hashes, check values, ephemeral keys) is a G1-only
//! [`Element`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use bls12_381::hash_to_curve::{ExpandMsgXmd, HashToCurve};
use bls12_381::{G1Affine, G1Projective, G2Affine, G2Projective, Gt};
use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::error::{Error, Result};

/// ASCII name of the only parameter profile, embedded in every artifact.
pub const PROFILE_NAME: &str = "CHSC-BLS12-381-v1";

/// Bytes of one compressed G1 element.
pub const ELEMENT_BYTES: usize = 48;
/// `l`: bits of one compressed G1 element.
pub const ELEMENT_BITS: usize = ELEMENT_BYTES * 8;
/// Bytes of a dual element (compressed G1 half followed by compressed G2 half).
pub const DUAL_ELEMENT_BYTES: usize = 48 + 96;
/// Bytes of a serialized scalar.
pub const SCALAR_BYTES: usize = 32;

/// Group order q, big-endian.
pub const GROUP_ORDER_BE: [u8; 32] = [
    0x73, 0xed, 0xa7, 0x53, 0x29, 0x9d, 0x7d, 0x48, 0x33, 0x39, 0xd8, 0x08, 0x09, 0xa1, 0xd8, 0x05,
    0x53, 0xbd, 0xa4, 0x02, 0xff, 0xfe, 0x5b, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01,
];

const H1_DST: &[u8] = b"CHSC-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
const H2_TAG: &[u8] = b"CHSC-V01-H2-SHAKE256";
const H3_TAG: &[u8] = b"CHSC-V01-H3-SHAKE256";

/// Supported parameter profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Profile {
    Bls12_381,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Bls12_381 => PROFILE_NAME,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            PROFILE_NAME | "bls12-381" | "BLS12-381" => Ok(Profile::Bls12_381),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }

    /// Largest security parameter K with q >= 2^K for this profile's curve.
    pub fn max_security_bits(self) -> u32 {
        match self {
            Profile::Bls12_381 => 128,
        }
    }
}

/// Public system parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemParams {
    profile: Profile,
    generator: DualElement,
}

impl SystemParams {
    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn generator(&self) -> &DualElement {
        &self.generator
    }

    /// Group order q, big-endian.
    pub fn group_order(&self) -> [u8; 32] {
        GROUP_ORDER_BE
    }

    pub fn group_order_bits(&self) -> usize {
        let lead = GROUP_ORDER_BE.iter().position(|&b| b != 0).unwrap_or(32);
        (32 - lead) * 8 - GROUP_ORDER_BE[lead].leading_zeros() as usize
    }

    /// `l`, the bit length of one encoded source-group element.
    pub fn element_bits(&self) -> usize {
        ELEMENT_BITS
    }

    pub fn h1_dst(&self) -> &'static [u8] {
        H1_DST
    }

    pub fn h2_tag(&self) -> &'static [u8] {
        H2_TAG
    }

    pub fn h3_tag(&self) -> &'static [u8] {
        H3_TAG
    }

    /// Canonical serialization: profile tag, q, l, generator, hash tags.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        crate::wire::put_profile_tag(&mut out);
        out.extend_from_slice(&GROUP_ORDER_BE);
        crate::wire::put_u32(&mut out, ELEMENT_BITS as u32);
        out.extend_from_slice(&self.generator.encode());
        for tag in [H1_DST, H2_TAG, H3_TAG] {
            crate::wire::put_bytes(&mut out, tag);
        }
        out
    }
}

/// Returns the parameters of the profile providing `security_bits` of
/// security. Deterministic.
pub fn setup(security_bits: u32) -> Result<SystemParams> {
    let profile = Profile::Bls12_381;
    if security_bits == 0 || security_bits > profile.max_security_bits() {
        return Err(Error::UnsupportedSecurity(security_bits));
    }
    Ok(SystemParams {
        profile,
        generator: DualElement::generator(),
    })
}

// ---------------------------------------------------------------------------
// Scalars

/// An integer modulo q.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(pub(crate) bls12_381::Scalar);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(bls12_381::Scalar::zero())
    }

    pub fn one() -> Self {
        Scalar(bls12_381::Scalar::one())
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(bls12_381::Scalar::from(v))
    }

    /// Uniform over Z_q (reduction of 512 random bits).
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar(bls12_381::Scalar::from_bytes_wide(&wide))
    }

    /// Uniform over [1, q).
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0 == bls12_381::Scalar::zero()
    }

    pub fn invert(&self) -> Option<Self> {
        Option::from(self.0.invert()).map(Scalar)
    }

    pub fn pow_u64(&self, e: u64) -> Self {
        Scalar(self.0.pow_vartime(&[e, 0, 0, 0]))
    }

    /// Fixed-width big-endian encoding.
    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        let mut b = self.0.to_bytes();
        b.reverse();
        b
    }

    /// Rejects non-canonical (>= q) encodings.
    pub fn from_bytes(bytes: &[u8; SCALAR_BYTES]) -> Result<Self> {
        let mut le = *bytes;
        le.reverse();
        Option::from(bls12_381::Scalar::from_bytes(&le))
            .map(Scalar)
            .ok_or(Error::InvalidEncoding("scalar not below group order"))
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

impl zeroize::Zeroize for Scalar {
    fn zeroize(&mut self) {
        self.0.zeroize();
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

// ---------------------------------------------------------------------------
// G1 elements

/// An element of the first source group.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Element(pub(crate) G1Projective);

impl Element {
    pub fn identity() -> Self {
        Element(G1Projective::identity())
    }

    pub fn generator() -> Self {
        Element(G1Projective::generator())
    }

    pub fn is_identity(&self) -> bool {
        bool::from(self.0.is_identity())
    }

    /// Uniformly random element; only useful to adversaries and tests.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Element::generator() * Scalar::random(rng)
    }

    /// Canonical compressed encoding, exactly `l` bits.
    pub fn encode(&self) -> [u8; ELEMENT_BYTES] {
        G1Affine::from(self.0).to_compressed()
    }

    /// Inverse of [`encode`](Self::encode). Rejects wrong lengths, points off
    /// the curve, points outside the prime-order subgroup, and non-canonical
    /// flag bits. The all-zero string is rejected (the identity encodes as
    /// `0xc0` followed by zeros).
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let arr: &[u8; ELEMENT_BYTES] = bytes.try_into().map_err(|_| Error::InvalidLength {
            what: "group element",
            expected: ELEMENT_BYTES,
            got: bytes.len(),
        })?;
        Option::<G1Affine>::from(G1Affine::from_compressed(arr))
            .map(|p| Element(p.into()))
            .ok_or(Error::InvalidEncoding("not a prime-order G1 point"))
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({})", hex::encode(self.encode()))
    }
}

impl Add for Element {
    type Output = Element;
    fn add(self, rhs: Element) -> Element {
        Element(self.0 + rhs.0)
    }
}

impl Sub for Element {
    type Output = Element;
    fn sub(self, rhs: Element) -> Element {
        Element(self.0 - rhs.0)
    }
}

impl Neg for Element {
    type Output = Element;
    fn neg(self) -> Element {
        Element(-self.0)
    }
}

impl Mul<Scalar> for Element {
    type Output = Element;
    fn mul(self, rhs: Scalar) -> Element {
        Element(self.0 * rhs.0)
    }
}

// ---------------------------------------------------------------------------
// Dual elements

/// A G1 element paired with the G2 element of the same discrete log.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct DualElement {
    primary: G1Affine,
    dual: G2Affine,
}

impl DualElement {
    pub fn generator() -> Self {
        DualElement {
            primary: G1Affine::generator(),
            dual: G2Affine::generator(),
        }
    }

    /// `g^s` in both halves.
    pub fn from_scalar(s: &Scalar) -> Self {
        DualElement {
            primary: (G1Projective::generator() * s.0).into(),
            dual: (G2Projective::generator() * s.0).into(),
        }
    }

    pub fn primary(&self) -> Element {
        Element(self.primary.into())
    }

    /// Checks `pair(primary, g.dual) == pair(g.primary, dual)`.
    pub fn is_consistent(&self) -> bool {
        bls12_381::pairing(&self.primary, &G2Affine::generator())
            == bls12_381::pairing(&G1Affine::generator(), &self.dual)
    }

    /// Compressed G1 half followed by compressed G2 half.
    pub fn encode(&self) -> [u8; DUAL_ELEMENT_BYTES] {
        let mut out = [0u8; DUAL_ELEMENT_BYTES];
        out[..48].copy_from_slice(&self.primary.to_compressed());
        out[48..].copy_from_slice(&self.dual.to_compressed());
        out
    }

    /// Rejects malformed halves and halves with different discrete logs.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != DUAL_ELEMENT_BYTES {
            return Err(Error::InvalidLength {
                what: "dual element",
                expected: DUAL_ELEMENT_BYTES,
                got: bytes.len(),
            });
        }
        let primary = Element::decode(&bytes[..48])?;
        let dual_bytes: &[u8; 96] = bytes[48..].try_into().expect("length checked");
        let dual = Option::<G2Affine>::from(G2Affine::from_compressed(dual_bytes))
            .ok_or(Error::InvalidEncoding("not a prime-order G2 point"))?;
        let out = DualElement {
            primary: primary.0.into(),
            dual,
        };
        if !out.is_consistent() {
            return Err(Error::InvalidEncoding("dual halves disagree"));
        }
        Ok(out)
    }
}

impl fmt::Debug for DualElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DualElement({})", hex::encode(self.primary.to_compressed()))
    }
}

impl Mul<Scalar> for DualElement {
    type Output = DualElement;
    fn mul(self, rhs: Scalar) -> DualElement {
        DualElement {
            primary: (self.primary * rhs.0).into(),
            dual: (self.dual * rhs.0).into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Target group

/// An element of the target group G_T.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TargetElement(pub(crate) Gt);

impl TargetElement {
    pub fn identity() -> Self {
        TargetElement(Gt::identity())
    }

    pub fn is_identity(&self) -> bool {
        self.0 == Gt::identity()
    }

    pub fn pow(&self, s: &Scalar) -> Self {
        TargetElement(self.0 * s.0)
    }
}

/// The bilinear map. Only dual elements may occupy the second slot.
pub fn pair(a: &Element, b: &DualElement) -> TargetElement {
    TargetElement(bls12_381::pairing(&G1Affine::from(a.0), &b.dual))
}

// ---------------------------------------------------------------------------
// Hash functions

/// H1: hash-to-curve into G1 (SSWU, random-oracle variant, XMD:SHA-256).
pub fn h1(message: &[u8]) -> Element {
    Element(<G1Projective as HashToCurve<ExpandMsgXmd<sha2::Sha256>>>::hash_to_curve(
        message, H1_DST,
    ))
}

fn xof(tag: &[u8], parts: &[&[u8]], out_bits: usize) -> Result<Vec<u8>> {
    if out_bits == 0 || !out_bits.is_multiple_of(8) {
        return Err(Error::InvalidBitLength(out_bits));
    }
    let mut h = Shake256::default();
    h.update((tag.len() as u32).to_be_bytes());
    h.update(tag);
    for part in parts {
        h.update(part);
    }
    let mut out = vec![0u8; out_bits / 8];
    h.finalize_xof().read(&mut out);
    Ok(out)
}

/// H2: G x G x G -> {0,1}^out_bits. Prefix-consistent in `out_bits`.
pub fn h2(k: &Element, y: &Element, s: &Element, out_bits: usize) -> Result<Vec<u8>> {
    xof(H2_TAG, &[&k.encode(), &y.encode(), &s.encode()], out_bits)
}

/// H3: G x {0,1}^(n+l) x G -> {0,1}^n, with n = bitlen(z) - l.
pub fn h3(k: &Element, z: &[u8], y: &Element) -> Result<Vec<u8>> {
    let z_bits = z.len() * 8;
    if z_bits <= ELEMENT_BITS {
        return Err(Error::InvalidBitLength(z_bits.saturating_sub(ELEMENT_BITS)));
    }
    let z_len = (z.len() as u64).to_be_bytes();
    xof(H3_TAG, &[&k.encode(), &z_len, z, &y.encode()], z_bits - ELEMENT_BITS)
}

// ---------------------------------------------------------------------------
// serde: hex strings of the canonical encodings

macro_rules! hex_serde {
    ($ty:ty, $decode:expr) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.to_wire()))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                let bytes = hex::decode(text).map_err(serde::de::Error::custom)?;
                #[allow(clippy::redundant_closure_call)]
                ($decode)(&bytes).map_err(serde::de::Error::custom)
            }
        }
    };
}

trait ToWire {
    fn to_wire(&self) -> Vec<u8>;
}

impl ToWire for Element {
    fn to_wire(&self) -> Vec<u8> {
        self.encode().to_vec()
    }
}

impl ToWire for DualElement {
    fn to_wire(&self) -> Vec<u8> {
        self.encode().to_vec()
    }
}

impl ToWire for Scalar {
    fn to_wire(&self) -> Vec<u8> {
        self.to_bytes().to_vec()
    }
}

hex_serde!(Element, |b: &[u8]| Element::decode(b));
hex_serde!(DualElement, |b: &[u8]| DualElement::decode(b));
hex_serde!(Scalar, |b: &[u8]| -> Result<Scalar> {
    let arr: [u8; SCALAR_BYTES] = b.try_into().map_err(|_| Error::InvalidLength {
        what: "scalar",
        expected: SCALAR_BYTES,
        got: b.len(),
    })?;
    Scalar::from_bytes(&arr)
});

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(0x5eed)
    }

    #[test]
    fn setup_profile() {
        let p = setup(128).unwrap();
        assert!(p.group_order_bits() >= 254);
        assert_eq!(p.group_order_bits(), 255);
        assert_eq!(p.element_bits(), 384);
        assert_eq!(p.to_bytes(), setup(128).unwrap().to_bytes());
        assert!(matches!(setup(129), Err(Error::UnsupportedSecurity(129))));
        assert!(matches!(setup(0), Err(Error::UnsupportedSecurity(0))));
        assert!(!pair(&Element::generator(), p.generator()).is_identity());
    }

    #[test]
    fn group_order_matches_backend() {
        // q - 1 is the largest canonical scalar, q itself is rejected.
        let minus_one = -Scalar::one();
        let mut q_minus_one = GROUP_ORDER_BE;
        q_minus_one[31] -= 1;
        assert_eq!(minus_one.to_bytes(), q_minus_one);
        assert!(Scalar::from_bytes(&GROUP_ORDER_BE).is_err());
    }

    #[test]
    fn small_bilinearity() {
        let g = Element::generator();
        let gd = DualElement::generator();
        let lhs = pair(&(g * Scalar::from_u64(2)), &(gd * Scalar::from_u64(3)));
        let rhs = pair(&g, &gd).pow(&Scalar::from_u64(6));
        assert_eq!(lhs, rhs);
        assert!(pair(&Element::identity(), &gd).is_identity());
    }

    #[test]
    fn dual_consistency_and_decode() {
        let mut rng = rng();
        let s = Scalar::random_nonzero(&mut rng);
        let y = DualElement::from_scalar(&s);
        assert!(y.is_consistent());
        assert_eq!(DualElement::decode(&y.encode()).unwrap(), y);

        // Splice a foreign G2 half: decode must refuse.
        let other = DualElement::from_scalar(&(s + Scalar::one()));
        let mut spliced = y.encode();
        spliced[48..].copy_from_slice(&other.encode()[48..]);
        assert_eq!(
            DualElement::decode(&spliced),
            Err(Error::InvalidEncoding("dual halves disagree"))
        );
    }

    #[test]
    fn element_decode_boundaries() {
        assert!(Element::decode(&[0u8; 48]).is_err());
        assert!(Element::decode(&[0u8; 47]).is_err());
        let mut id = [0u8; 48];
        id[0] = 0xc0;
        assert!(Element::decode(&id).unwrap().is_identity());
        assert_eq!(Element::identity().encode(), id);
    }

    #[test]
    fn scalar_roundtrip_and_inverse() {
        let mut rng = rng();
        for _ in 0..50 {
            let s = Scalar::random_nonzero(&mut rng);
            assert_eq!(Scalar::from_bytes(&s.to_bytes()).unwrap(), s);
            assert_eq!(s * s.invert().unwrap(), Scalar::one());
        }
        assert!(Scalar::zero().invert().is_none());
    }

    #[test]
    fn hash_lengths_and_prefix_consistency() {
        let mut rng = rng();
        let (k, y, s) = (Element::random(&mut rng), Element::random(&mut rng), Element::random(&mut rng));
        assert_eq!(h2(&k, &y, &s, 256 + ELEMENT_BITS).unwrap().len() * 8, 256 + ELEMENT_BITS);
        let short = h2(&k, &y, &s, ELEMENT_BITS).unwrap();
        let long = h2(&k, &y, &s, 2 * ELEMENT_BITS).unwrap();
        assert_eq!(&long[..short.len()], &short[..]);
        assert_eq!(h2(&k, &y, &s, 0), Err(Error::InvalidBitLength(0)));
        assert_eq!(h2(&k, &y, &s, 7), Err(Error::InvalidBitLength(7)));

        let z = vec![7u8; 16 + ELEMENT_BYTES];
        assert_eq!(h3(&k, &z, &y).unwrap().len(), 16);
        assert!(h3(&k, &[0u8; ELEMENT_BYTES], &y).is_err());
    }

    #[test]
    fn h1_accepts_empty_and_is_deterministic() {
        assert_eq!(h1(b""), h1(b""));
        assert!(!h1(b"").is_identity());
        assert_ne!(h1(b"a"), h1(b"b"));
    }
}
