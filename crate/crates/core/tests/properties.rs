use chsc_core::chameleon::{self, keygen, SecretKey};
use chsc_core::group::{h1, pair, setup, DualElement, Element, Scalar, ELEMENT_BYTES, PROFILE_NAME};
use chsc_core::identity::Mid;
use chsc_core::signcryption::{dsc, open_hybrid, sc, seal_hybrid, Ciphertext, HybridEnvelope};
use proptest::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use sha2::{Digest, Sha256};

fn scalar(seed: u64) -> Scalar {
    Scalar::random(&mut ChaCha20Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pairing_is_bilinear(a in any::<u64>(), b in any::<u64>()) {
        let (a, b) = (scalar(a), scalar(b));
        let g = Element::generator();
        let gg = DualElement::generator();
        let lhs = pair(&(g * a), &(gg * b));
        prop_assert_eq!(lhs, pair(&g, &gg).pow(&(a * b)));
        prop_assert_eq!(lhs, pair(&(g * (a * b)), &gg));
    }

    #[test]
    fn element_encoding_roundtrips(seed in any::<u64>()) {
        let e = Element::random(&mut ChaCha20Rng::seed_from_u64(seed));
        let bytes = e.encode();
        prop_assert_eq!(bytes.len(), ELEMENT_BYTES);
        prop_assert_eq!(Element::decode(&bytes).unwrap(), e);
        let d = DualElement::from_scalar(&scalar(seed));
        prop_assert_eq!(DualElement::decode(&d.encode()).unwrap(), d);
    }

    #[test]
    fn collision_chains_keep_the_hash(seed in any::<u64>(), msgs in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..64), 2..6)) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = keygen(&setup(128).unwrap(), &mut rng);
        let (h, mut r) = chameleon::hash(keys.public(), &msgs[0], &mut rng);
        for w in msgs.windows(2) {
            let next = chameleon::collide(&keys, &h, &w[0], &r, &w[1]).unwrap();
            prop_assert!(chameleon::verify_collision(keys.public(), &h, &w[0], &r, &w[1], &next));
            r = next;
        }
        // pairing relation checked without the library's `check`
        let last = msgs.last().unwrap();
        prop_assert_eq!(pair(&(h - h1(last)), &DualElement::generator()), pair(&r, keys.public()));
    }

    #[test]
    fn mids_roundtrip(country in 0u32..1000, district in 0u32..1_000_000, y in 1900u32..2100, m in 1u32..13, d in 1u32..29, psn in 0u32..1_000_000) {
        let mid = Mid::build(country, district, y * 10_000 + m * 100 + d, psn).unwrap();
        prop_assert_eq!(mid.as_str().len(), 23);
        prop_assert_eq!(Mid::parse(mid.as_str()).unwrap(), mid.clone());
        let expected: [u8; 32] = Sha256::digest(mid.as_str().as_bytes()).into();
        prop_assert_eq!(*mid.hid().as_bytes(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn signcryption_roundtrips_any_message(seed in any::<u64>(), msg in prop::collection::vec(any::<u8>(), 1..300)) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let params = setup(128).unwrap();
        let (a, b) = (keygen(&params, &mut rng), keygen(&params, &mut rng));
        let (h, _) = chameleon::hash(a.public(), b"vid", &mut rng);
        let ct = sc(a.secret(), &h, &msg, b.public(), &mut rng).unwrap();
        let decoded = Ciphertext::from_bytes(&ct.to_bytes()).unwrap();
        prop_assert_eq!(&decoded, &ct);
        prop_assert_eq!(dsc(a.public(), &decoded, &h, b.secret()).unwrap().message, msg.clone());

        let env = seal_hybrid(a.secret(), &h, &msg, b.public(), &mut rng).unwrap();
        let env = HybridEnvelope::from_bytes(&env.to_bytes()).unwrap();
        prop_assert_eq!(open_hybrid(a.public(), &env, &h, b.secret()).unwrap(), msg);
    }
}

#[test]
fn ciphertext_layout() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let params = setup(128).unwrap();
    let (a, b) = (keygen(&params, &mut rng), keygen(&params, &mut rng));
    let (h, _) = chameleon::hash(a.public(), b"vid", &mut rng);
    let msg = [0x5au8; 16];
    let ct = sc(a.secret(), &h, &msg, b.public(), &mut rng).unwrap();
    let bytes = ct.to_bytes();

    let tag = PROFILE_NAME.as_bytes();
    assert_eq!(bytes[0] as usize, tag.len());
    assert_eq!(&bytes[1..1 + tag.len()], tag);
    let mut at = 1 + tag.len();
    assert_eq!(u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()), 128);
    at += 4;
    assert_eq!(&bytes[at..at + 48], &ct.ephemeral.encode());
    at += 48;
    assert_eq!(&bytes[at..at + 16 + 48], &ct.masked[..]);
    at += 16 + 48;
    assert_eq!(&bytes[at..], &ct.check.encode());
    assert_eq!(bytes.len(), ct.encoded_len());

    for cut in [0, 1, bytes.len() / 2, bytes.len() - 1] {
        assert!(Ciphertext::from_bytes(&bytes[..cut]).is_err());
    }
    let mut long = bytes.clone();
    long.push(0);
    assert!(Ciphertext::from_bytes(&long).is_err());
}

#[test]
fn sample_mid_hid() {
    let mid = Mid::parse("15611010520240601301107").unwrap();
    assert_eq!(
        mid.hid().to_hex(),
        "36cd1150f5005840b3aa1da566c4169b9119d13ac882412f377feea077bba59b"
    );
}

#[test]
fn secret_keys_reject_zero() {
    assert!(SecretKey::from_scalar(Scalar::zero()).is_err());
    assert!(SecretKey::from_scalar(Scalar::one()).is_ok());
}
