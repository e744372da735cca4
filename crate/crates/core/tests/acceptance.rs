//! Acceptance run: one PASS/FAIL line per criterion. Built with
//! `harness = false` so the lines always reach the test log.

use std::process::ExitCode;
use std::time::Instant;

use chsc_core::attacks::{self, Outcome, Scenario, Summary, Verdict};
use chsc_core::chameleon::{self, keygen, KeyPair};
use chsc_core::group::{h1, pair, setup, DualElement, Element, ELEMENT_BITS, ELEMENT_BYTES};
use chsc_core::metrics::{self, HostInfo};
use chsc_core::protocols::world::World;
use chsc_core::protocols::{Phase, RejectReason};
use chsc_core::signcryption::{dsc, sc, vc, Ciphertext};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

const SEED: u64 = 0x00C0_FFEE;
const KIB: usize = 1024;

/// Opening relation recomputed from the pairing directly:
/// `e(h - H1(m), g) == e(r, y)`.
fn opens(pk: &DualElement, h: &Element, m: &[u8], r: &Element) -> bool {
    pair(&(*h - h1(m)), &DualElement::generator()) == pair(r, pk)
}

struct Party {
    keys: KeyPair,
    visible: Vec<u8>,
    h: Element,
    r: Element,
}

fn party(rng: &mut ChaCha20Rng) -> Party {
    let keys = keygen(&setup(128).unwrap(), rng);
    let mut visible = vec![0u8; 24];
    rng.fill_bytes(&mut visible);
    let (h, r) = chameleon::hash(keys.public(), &visible, rng);
    Party { keys, visible, h, r }
}

fn random_message(rng: &mut ChaCha20Rng, bits: usize) -> Vec<u8> {
    let mut m = vec![0u8; bits / 8];
    rng.fill_bytes(&mut m);
    m
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn correctness(rep: &mut Report, rng: &mut ChaCha20Rng) {
    let t = Instant::now();
    let (a, b) = (party(rng), party(rng));
    let mut failures = 0;
    for i in 0..1000 {
        let n = if i % 2 == 0 { 128 } else { 2176 };
        let m = random_message(rng, n);
        let ct = sc(a.keys.secret(), &a.h, &m, b.keys.public(), rng).unwrap();
        let ok = ct.message_bits() == n
            && ct.masked.len() * 8 == n + ELEMENT_BITS
            && match dsc(a.keys.public(), &ct, &a.h, b.keys.secret()) {
                Ok(opened) => opened.message == m && opens(a.keys.public(), &a.h, &m, &opened.check),
                Err(_) => false,
            };
        failures += usize::from(!ok);
    }
    rep.line(
        "scheme correctness",
        failures == 0,
        format!("1000 sc->dsc roundtrips over n in {{128, 2176}}, {failures} failures"),
        t,
    );
}

fn public_verifiability(rep: &mut Report, rng: &mut ChaCha20Rng) {
    let t = Instant::now();
    let (a, b) = (party(rng), party(rng));
    let mut honest_rejected = 0;
    let mut false_accepts = [0usize; 3];
    for _ in 0..1000 {
        let c = party(rng);
        let m = random_message(rng, 128);
        let ct = sc(a.keys.secret(), &a.h, &m, b.keys.public(), rng).unwrap();
        honest_rejected += usize::from(!vc(a.keys.public(), &ct, &a.h, &a.visible, &a.r, b.keys.public()));
        // C presents its own valid VID against A's ciphertext.
        false_accepts[0] += usize::from(vc(c.keys.public(), &ct, &c.h, &c.visible, &c.r, b.keys.public()));
        false_accepts[1] += usize::from(vc(a.keys.public(), &ct, &a.h, &a.visible, &a.r, c.keys.public()));
        false_accepts[2] += usize::from(vc(a.keys.public(), &ct, &a.h, &c.visible, &c.r, b.keys.public()));
    }
    let pass = honest_rejected == 0 && false_accepts == [0; 3];
    rep.line(
        "public verifiability",
        pass,
        format!(
            "honest 1000 -> {} true; false accepts: wrong pk_A+h_A {}, wrong pk_B {}, wrong VID {} (1000 each)",
            1000 - honest_rejected,
            false_accepts[0],
            false_accepts[1],
            false_accepts[2]
        ),
        t,
    );
}

fn tamper_completeness(rep: &mut Report, rng: &mut ChaCha20Rng) {
    let t = Instant::now();
    let (a, b) = (party(rng), party(rng));
    let m = random_message(rng, 128);
    let ct = sc(a.keys.secret(), &a.h, &m, b.keys.public(), rng).unwrap();
    let bytes = ct.to_bytes();
    // K, Z and R'' are the trailing fields of the encoding.
    let fields = ELEMENT_BYTES + ct.masked.len() + ELEMENT_BYTES;
    let start = bytes.len() - fields;
    let mut flips = 0;
    let mut accepts = 0;
    for bit in 0..fields * 8 {
        let mut t = bytes.clone();
        t[start + bit / 8] ^= 0x80 >> (bit % 8);
        flips += 1;
        if let Ok(tampered) = Ciphertext::from_bytes(&t) {
            accepts += usize::from(dsc(a.keys.public(), &tampered, &a.h, b.keys.secret()).is_ok());
        }
    }
    let expected = 3 * ELEMENT_BITS + 128;
    rep.line(
        "tamper completeness",
        accepts == 0 && flips == expected,
        format!("{flips} single-bit flips of K, Z, R'' (expected {expected}), {accepts} accepted"),
        t,
    );
}

fn collisions(rep: &mut Report, rng: &mut ChaCha20Rng) {
    let t = Instant::now();
    let a = party(rng);
    let pk = a.keys.public();
    let mut failures = 0;
    for _ in 0..1000 {
        let (m, m2) = (random_message(rng, 256), random_message(rng, 256));
        let (h, r) = chameleon::hash(pk, &m, rng);
        let ok = chameleon::collide(&a.keys, &h, &m, &r, &m2)
            .map(|r2| opens(pk, &h, &m, &r) && opens(pk, &h, &m2, &r2))
            .unwrap_or(false);
        failures += usize::from(!ok);
    }
    let (m1, m2, m3) = (b"first".as_slice(), b"second".as_slice(), b"third".as_slice());
    let (h, r1) = chameleon::hash(pk, m1, rng);
    let chain = chameleon::collide(&a.keys, &h, m1, &r1, m2)
        .and_then(|r2| Ok((r2, chameleon::collide(&a.keys, &h, m2, &r2, m3)?)))
        .map(|(r2, r3)| opens(pk, &h, m1, &r1) && opens(pk, &h, m2, &r2) && opens(pk, &h, m3, &r3))
        .unwrap_or(false);
    rep.line(
        "chameleon collisions",
        failures == 0 && chain,
        format!("1000 random pairs, {failures} failures; chained triple {}", if chain { "verifies" } else { "FAILS" }),
        t,
    );
}

/// Phase in which each expected rejection is predicted to occur.
fn predicted_phase(o: &Outcome) -> Option<Phase> {
    match o.expected {
        Verdict::Accepted => Some(Phase::Done),
        Verdict::Rejected(RejectReason::VcFalse) | Verdict::NotRecognized => Some(Phase::Challenge),
        Verdict::Rejected(RejectReason::DscFailure | RejectReason::StaleChallenge) => Some(Phase::Verify),
        Verdict::Withheld => Some(Phase::Claim),
        Verdict::Rejected(_) => None,
    }
}

fn attack_suite(rep: &mut Report, rng: &mut ChaCha20Rng) {
    const RUNS: usize = 100;
    let world = World::new(setup(128).unwrap(), rng);
    for scenario in Scenario::ALL {
        let t = Instant::now();
        let outcomes = attacks::run(scenario, RUNS, &world, rng.next_u64());
        let s = Summary::of(&outcomes);
        let wrong_phase = outcomes.iter().filter(|o| predicted_phase(o) != Some(o.phase)).count();
        let mut variants: Vec<&str> = outcomes.iter().filter(|o| !o.control).map(|o| o.variant.as_str()).collect();
        variants.sort_unstable();
        variants.dedup();
        rep.line(
            &format!("attack suite / {scenario}"),
            s.all_held() && wrong_phase == 0 && s.runs == RUNS,
            format!(
                "{} runs, variants [{}]: {}/{} rejected as predicted, {} adversary successes, {} off-phase, controls {}/{}",
                s.runs,
                variants.join(", "),
                s.attacks_as_expected,
                s.attacks,
                s.adversary_successes,
                wrong_phase,
                s.controls_accepted,
                s.controls
            ),
            t,
        );
    }
}

fn timing(rep: &mut Report) {
    let t = Instant::now();
    let host = HostInfo::current();
    let ops = metrics::time_ops(50, SEED);
    let sc_rows: Vec<_> = ops.iter().filter(|o| o.op == "sc").collect();
    let worst_sc = sc_rows.iter().map(|o| o.median_ms).fold(0.0, f64::max);
    let detail: Vec<String> = ops
        .iter()
        .map(|o| format!("{}@{}={:.2}ms", o.op, o.message_bits, o.median_ms))
        .collect();
    rep.line(
        "timing / signcryption",
        worst_sc <= 400.0,
        format!(
            "median sc {:.2} ms (limit 400) on {}/{} {} cpus, {} build; {}",
            worst_sc,
            host.os,
            host.arch,
            host.cpus,
            host.build,
            detail.join(" ")
        ),
        t,
    );
    let t = Instant::now();
    match metrics::time_second_meet(20, SEED) {
        Ok(m) => rep.line(
            "timing / second mutual meeting",
            m.median_second_meeting_ms <= 2500.0,
            format!(
                "median {:.1} ms over {} runs (limit 2500), first meeting with writes {:.1} ms",
                m.median_second_meeting_ms, m.iterations, m.first_meeting_ms
            ),
            t,
        ),
        Err(r) => rep.line("timing / second mutual meeting", false, format!("meeting rejected: {r}"), t),
    }
}

fn storage(rep: &mut Report) {
    let t = Instant::now();
    let friends = [20, 40, 60, 80, 100];
    match metrics::storage_profile(&friends, SEED) {
        Ok(rows) => {
            let exact = rows
                .iter()
                .all(|r| r.fi_records == r.friends && r.reserved_bytes == r.friends * 33 * KIB);
            let per_friend_used: Vec<usize> = rows.iter().map(|r| r.used_bytes / r.friends).collect();
            let linear = rows.iter().all(|r| r.used_bytes % r.friends == 0)
                && per_friend_used.windows(2).all(|w| w[0] == w[1]);
            let max_mit = rows.iter().map(|r| r.max_mit_bytes).max().unwrap_or(0);
            let table: Vec<String> = rows.iter().map(|r| format!("f={}:{}B", r.friends, r.reserved_bytes)).collect();
            rep.line(
                "storage model",
                exact && linear && max_mit <= 256 * KIB && max_mit > 0,
                format!(
                    "reserved {} (f*33 KiB: {}); used per friend {:?} B; largest MIT {} B (limit {})",
                    table.join(" "),
                    if exact { "exact" } else { "MISMATCH" },
                    per_friend_used,
                    max_mit,
                    256 * KIB
                ),
                t,
            );
        }
        Err(r) => rep.line("storage model", false, format!("profile run rejected: {r}"), t),
    }
}

fn forgery_smoke(rep: &mut Report, rng: &mut ChaCha20Rng) {
    let t = Instant::now();
    let (a, b) = (party(rng), party(rng));
    let honest = sc(a.keys.secret(), &a.h, &random_message(rng, 128), b.keys.public(), rng).unwrap();
    let mut accepts = 0;
    for i in 0..10_000 {
        let forged = match i % 3 {
            // fully random ciphertext
            0 => Ciphertext {
                ephemeral: Element::random(rng),
                masked: random_message(rng, 128 + ELEMENT_BITS),
                check: Element::random(rng),
            },
            // honest K and Z, random R''
            1 => Ciphertext {
                check: Element::random(rng),
                ..honest.clone()
            },
            // an outsider signcrypts under A's avatar hash with its own key
            _ => {
                let c = keygen(&setup(128).unwrap(), rng);
                sc(c.secret(), &a.h, &random_message(rng, 128), b.keys.public(), rng).unwrap()
            }
        };
        accepts += usize::from(dsc(a.keys.public(), &forged, &a.h, b.keys.secret()).is_ok());
        accepts += usize::from(vc(a.keys.public(), &forged, &a.h, &a.visible, &a.r, b.keys.public()));
    }
    rep.line(
        "unforgeability smoke",
        accepts == 0,
        format!("10000 forgery attempts against dsc and vc, {accepts} accepted"),
        t,
    );
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the default harness are not
    // meaningful here; accept and ignore them.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut rep = Report { failed: 0 };
    correctness(&mut rep, &mut rng);
    public_verifiability(&mut rep, &mut rng);
    tamper_completeness(&mut rep, &mut rng);
    collisions(&mut rep, &mut rng);
    attack_suite(&mut rep, &mut rng);
    timing(&mut rep);
    storage(&mut rep);
    forgery_smoke(&mut rep, &mut rng);
    println!("acceptance: {} criteria failed", rep.failed);
    if rep.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
