//! Mock iris pipeline.
//!
//! Codes are packed bit vectors, MSB first within each byte. Enrollment is a
//! seeded pseudo-random code, samples flip bits independently, and matching
//! is normalized Hamming distance against a threshold. A challenge is
//! watermarked into a sample by appending it after the feature bits.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wire::{self, Reader};

/// Feature length F in bits.
pub const IRIS_BITS: usize = 2048;
/// Watermarked challenge length in bytes (128 bits).
pub const CHALLENGE_BYTES: usize = 16;
/// Default normalized Hamming distance threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.32;
/// Bytes of a serialized [`MarkedSample`].
pub const MARKED_SAMPLE_BYTES: usize = IRIS_BITS / 8 + CHALLENGE_BYTES;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrisCode {
    bits: usize,
    #[serde(with = "hex::serde")]
    packed: Vec<u8>,
}

impl IrisCode {
    pub fn from_packed(packed: Vec<u8>, bits: usize) -> Result<Self> {
        if packed.len() != bits.div_ceil(8) {
            return Err(Error::InvalidLength {
                what: "iris code",
                expected: bits.div_ceil(8),
                got: packed.len(),
            });
        }
        Ok(IrisCode { bits, packed })
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    pub fn bit(&self, i: usize) -> bool {
        self.packed[i / 8] >> (7 - i % 8) & 1 == 1
    }

    fn flip(&mut self, i: usize) {
        self.packed[i / 8] ^= 1 << (7 - i % 8);
    }

    pub fn hamming(&self, other: &IrisCode) -> Result<usize> {
        if self.bits != other.bits {
            return Err(Error::IrisLength(self.bits, other.bits));
        }
        Ok(self
            .packed
            .iter()
            .zip(&other.packed)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn normalized_distance(&self, other: &IrisCode) -> Result<f64> {
        Ok(self.hamming(other)? as f64 / self.bits as f64)
    }

    /// 32-bit bit count, then packed bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.packed.len());
        wire::put_u32(&mut out, self.bits as u32);
        out.extend_from_slice(&self.packed);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "iris code");
        let bits = r.u32()? as usize;
        let packed = r.take(bits.div_ceil(8))?.to_vec();
        r.finish()?;
        IrisCode::from_packed(packed, bits)
    }
}

impl std::fmt::Debug for IrisCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IrisCode({} bits)", self.bits)
    }
}

/// Enrolled reference code stored in the MIT.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrisTemplate {
    pub code: IrisCode,
    /// Seed the mock code was derived from; not serialized into the MIT.
    #[serde(default)]
    pub subject_seed: Option<u64>,
}

impl IrisTemplate {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.code.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(IrisTemplate {
            code: IrisCode::from_bytes(bytes)?,
            subject_seed: None,
        })
    }
}

/// A live capture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrisSample {
    pub code: IrisCode,
}

/// A sample with a challenge watermark appended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSample {
    pub feature: IrisCode,
    pub mark: [u8; CHALLENGE_BYTES],
}

impl MarkedSample {
    /// Packed feature bits followed by the mark; `F + 128` bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MARKED_SAMPLE_BYTES);
        out.extend_from_slice(self.feature.packed());
        out.extend_from_slice(&self.mark);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != MARKED_SAMPLE_BYTES {
            return Err(Error::InvalidLength {
                what: "marked sample",
                expected: MARKED_SAMPLE_BYTES,
                got: bytes.len(),
            });
        }
        let (feature, mark) = bytes.split_at(IRIS_BITS / 8);
        Ok(MarkedSample {
            feature: IrisCode::from_packed(feature.to_vec(), IRIS_BITS)?,
            mark: mark.try_into().expect("length checked"),
        })
    }
}

/// Deterministic pseudo-random F-bit template for `subject_seed`.
pub fn enroll(subject_seed: u64) -> IrisTemplate {
    let mut rng = ChaCha20Rng::seed_from_u64(subject_seed);
    let mut packed = vec![0u8; IRIS_BITS / 8];
    rng.fill_bytes(&mut packed);
    IrisTemplate {
        code: IrisCode {
            bits: IRIS_BITS,
            packed,
        },
        subject_seed: Some(subject_seed),
    }
}

fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Flips each template bit independently with probability `noise_rate`.
pub fn sample<R: RngCore>(template: &IrisTemplate, noise_rate: f64, rng: &mut R) -> Result<IrisSample> {
    if !(0.0..0.5).contains(&noise_rate) {
        return Err(Error::NoiseRate(noise_rate));
    }
    let mut code = template.code.clone();
    if noise_rate > 0.0 {
        for i in 0..code.len() {
            if unit_f64(rng) < noise_rate {
                code.flip(i);
            }
        }
    }
    Ok(IrisSample { code })
}

/// Hamming-distance matcher.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matcher {
    pub threshold: f64,
}

impl Default for Matcher {
    fn default() -> Self {
        Matcher {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Matcher {
    /// True iff the normalized distance is at most the threshold.
    pub fn matches(&self, code: &IrisCode, template: &IrisTemplate) -> Result<bool> {
        Ok(code.normalized_distance(&template.code)? <= self.threshold)
    }
}

/// Matches with the default threshold.
pub fn matches(code: &IrisCode, template: &IrisTemplate) -> Result<bool> {
    Matcher::default().matches(code, template)
}

pub fn embed(sample: &IrisSample, challenge: &[u8; CHALLENGE_BYTES]) -> MarkedSample {
    MarkedSample {
        feature: sample.code.clone(),
        mark: *challenge,
    }
}

pub fn extract(marked: &MarkedSample) -> (IrisSample, [u8; CHALLENGE_BYTES]) {
    (
        IrisSample {
            code: marked.feature.clone(),
        },
        marked.mark,
    )
}
