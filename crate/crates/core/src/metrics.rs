//! Timing and storage measurements shared by the benchmark command and the
//! acceptance tests.

use std::time::Instant;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::biometric::MARKED_SAMPLE_BYTES;
use crate::chameleon::{self, keygen};
use crate::group::setup;
use crate::ledger::{Namespace, FI_CONTENT_SLOT_BYTES, INDEX_SLOT_BYTES};
use crate::protocols::world::{random_mid, sample_scene, Link, World};
use crate::protocols::Rejection;
use crate::signcryption::{dsc, sc, vc};

/// Median of `samples`; 0 for an empty slice.
pub fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

#[derive(Clone, Debug, Serialize)]
pub struct HostInfo {
    pub os: &'static str,
    pub arch: &'static str,
    pub cpus: usize,
    pub build: &'static str,
}

impl HostInfo {
    pub fn current() -> Self {
        HostInfo {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            build: if cfg!(debug_assertions) { "debug" } else { "release" },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OpTiming {
    pub op: &'static str,
    pub message_bits: usize,
    pub iterations: usize,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl OpTiming {
    fn from_samples(op: &'static str, message_bits: usize, samples: &[f64]) -> Self {
        OpTiming {
            op,
            message_bits,
            iterations: samples.len(),
            median_ms: median(samples),
            min_ms: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Per-operation timings for `hash`, `check`, `collide`, `sc`, `vc` and
/// `dsc`, each over both a 128-bit and a marked-sample-sized message.
pub fn time_ops(iterations: usize, seed: u64) -> Vec<OpTiming> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let params = setup(128).expect("supported");
    let a = keygen(&params, &mut rng);
    let b = keygen(&params, &mut rng);
    let (h, r) = chameleon::hash(a.public(), b"visible identity", &mut rng);
    let mut out = Vec::new();
    for bytes in [16, MARKED_SAMPLE_BYTES] {
        let bits = bytes * 8;
        let mut msg = vec![0u8; bytes];
        let mut t: [Vec<f64>; 6] = Default::default();
        for _ in 0..iterations {
            rng.fill_bytes(&mut msg);
            let s = Instant::now();
            let (h2, r2) = chameleon::hash(a.public(), &msg, &mut rng);
            t[0].push(ms(s));
            let s = Instant::now();
            assert!(chameleon::check(a.public(), &h2, &msg, &r2));
            t[1].push(ms(s));
            let s = Instant::now();
            let r3 = chameleon::collide(&a, &h, b"visible identity", &r, &msg).expect("compatible");
            t[2].push(ms(s));
            debug_assert!(chameleon::check(a.public(), &h, &msg, &r3));
            let s = Instant::now();
            let ct = sc(a.secret(), &h, &msg, b.public(), &mut rng).expect("non-empty");
            t[3].push(ms(s));
            let s = Instant::now();
            assert!(vc(a.public(), &ct, &h, b"visible identity", &r, b.public()));
            t[4].push(ms(s));
            let s = Instant::now();
            assert!(dsc(a.public(), &ct, &h, b.secret()).is_ok());
            t[5].push(ms(s));
        }
        for (name, samples) in ["hash", "check", "collide", "sc", "vc", "dsc"].into_iter().zip(&t) {
            out.push(OpTiming::from_samples(name, bits, samples));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MeetTiming {
    pub iterations: usize,
    pub first_meeting_ms: f64,
    pub median_second_meeting_ms: f64,
    pub samples_ms: Vec<f64>,
}

/// A first mutual meeting (with first-impression writes), then
/// `iterations` timed mutual meetings with recall.
pub fn time_second_meet(iterations: usize, seed: u64) -> Result<MeetTiming, Rejection> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let world = World::new(setup(128).expect("supported"), &mut rng);
    let mut a = world
        .enroll("A", random_mid(&mut rng), rng.next_u64(), b"avatar A", &mut rng)
        .expect("fresh Mid");
    let mut b = world
        .enroll("B", random_mid(&mut rng), rng.next_u64(), b"avatar B", &mut rng)
        .expect("fresh Mid");
    let (sa, sb) = (sample_scene("A"), sample_scene("B"));
    let s = Instant::now();
    world
        .meet(&mut a, &mut b, &sa, &sb, None, &mut rng)
        .map_err(|f| f.rejection)?;
    let first_meeting_ms = ms(s);
    let mut samples_ms = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let s = Instant::now();
        world
            .meet(&mut a, &mut b, &sa, &sb, None, &mut rng)
            .map_err(|f| f.rejection)?;
        samples_ms.push(ms(s));
    }
    Ok(MeetTiming {
        iterations,
        first_meeting_ms,
        median_second_meeting_ms: median(&samples_ms),
        samples_ms,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StorageRow {
    pub friends: usize,
    pub fi_records: usize,
    pub reserved_bytes: usize,
    pub used_bytes: usize,
    /// `friends * (index slot + content slot)`.
    pub budget_bytes: usize,
    pub max_mit_bytes: usize,
}

/// For each friend count, one owner meets that many friends and its
/// first-impression footprint is measured.
pub fn storage_profile(friend_counts: &[usize], seed: u64) -> Result<Vec<StorageRow>, Rejection> {
    let mut rows = Vec::new();
    for &friends in friend_counts {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ friends as u64);
        let world = World::new(setup(128).expect("supported"), &mut rng);
        let owner = world
            .enroll("owner", random_mid(&mut rng), rng.next_u64(), b"owner", &mut rng)
            .expect("fresh Mid");
        let scene = sample_scene("owner");
        for i in 0..friends {
            let mut friend = world
                .enroll(&format!("friend{i}"), random_mid(&mut rng), rng.next_u64(), b"friend", &mut rng)
                .expect("fresh Mid");
            world.authenticate(&owner, &mut friend, &scene, &mut Link::new(), &mut rng)?;
        }
        let store = world.env.store.read();
        let fp = store.fi_footprint(&owner.hid());
        let mit = store.accounting().get(Namespace::MitRecord);
        let max_mit_bytes = store
            .content
            .ids()
            .filter_map(|id| store.content.get(id).ok())
            .filter(|b| crate::identity::Mit::from_bytes(b).is_ok())
            .map(|b| b.len())
            .max()
            .unwrap_or(0);
        debug_assert!(mit.entries > friends);
        rows.push(StorageRow {
            friends,
            fi_records: fp.records,
            reserved_bytes: fp.reserved_bytes(),
            used_bytes: fp.used_bytes(),
            budget_bytes: friends * (INDEX_SLOT_BYTES + FI_CONTENT_SLOT_BYTES),
            max_mit_bytes,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_odd_empty() {
        assert_eq!(median(&[]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_storage_profile_is_linear() {
        let rows = storage_profile(&[1, 3], 5).unwrap();
        for r in &rows {
            assert_eq!(r.fi_records, r.friends);
            assert_eq!(r.reserved_bytes, r.friends * 33 * 1024);
            assert!(r.used_bytes < r.reserved_bytes);
            assert!(r.max_mit_bytes > 0 && r.max_mit_bytes <= 256 * 1024);
        }
    }

    #[test]
    fn ops_and_meet_timings_run() {
        let ops = time_ops(2, 1);
        assert_eq!(ops.len(), 12);
        assert!(ops.iter().all(|o| o.iterations == 2 && o.median_ms >= 0.0));
        let meet = time_second_meet(2, 1).unwrap();
        assert_eq!(meet.samples_ms.len(), 2);
    }
}
