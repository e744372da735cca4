//! Adversary scenarios against the avatar and ciphertext protocols.
//!
//! Every scenario enrolls a fresh cast (owner A, writer/verifier B,
//! adversary C) into a shared [`World`], runs its attack variants and an
//! honest control, and reports one [`Outcome`] per run. Adversaries only use
//! what is public (ledger, content store, MITs, avatars) plus their own keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand_chacha::ChaCha20Rng;
use rand_core::{CryptoRng, RngCore, SeedableRng};
use serde::Serialize;

use crate::biometric;
use crate::identity::{avatar_create, hid_derive, FirstImpressionIndex, Hid};
use crate::ledger::ContentId;
use crate::protocols::avatar::{AvatarVerifier, Recall};
use crate::protocols::messages::{Claim, CtChallenge, CtClaim, CtResponse, ResponseMsg, StoredFi};
use crate::protocols::storage::{fi_create, ContractSession, CtWriter};
use crate::protocols::world::{random_mid, Link, Participant, World};
use crate::protocols::{Phase, RejectReason, Rejection};
use crate::signcryption::{open_hybrid, sc, seal_hybrid};

/// Candidates tried by the Hid preimage probe.
pub const PREIMAGE_CANDIDATES: usize = 10_000;
/// Prefix of every generated scene, searched for by the ledger scan.
pub const SCENE_MARKER: &[u8] = b"SCENE-MARKER:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Replacing,
    Forging,
    Disguise,
    Privacy,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Replacing, Scenario::Forging, Scenario::Disguise, Scenario::Privacy];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Replacing => "replacing",
            Scenario::Forging => "forging",
            Scenario::Disguise => "disguise",
            Scenario::Privacy => "privacy",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "reason")]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
    /// Authentication succeeded but the verifier did not recognize anyone.
    NotRecognized,
    /// A passive probe learned nothing.
    Withheld,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted => f.write_str("accepted"),
            Verdict::Rejected(r) => write!(f, "rejected({r})"),
            Verdict::NotRecognized => f.write_str("not-recognized"),
            Verdict::Withheld => f.write_str("withheld"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub scenario: Scenario,
    pub variant: String,
    pub control: bool,
    pub phase: Phase,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub adversary_succeeded: bool,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Outcome {
    pub fn as_expected(&self) -> bool {
        self.verdict == self.expected && !self.adversary_succeeded
    }
}

struct Run {
    scenario: Scenario,
    out: Vec<Outcome>,
}

impl Run {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        variant: &str,
        control: bool,
        started: Instant,
        (phase, verdict): (Phase, Verdict),
        expected: Verdict,
        adversary_succeeded: bool,
        detail: Option<String>,
    ) {
        self.out.push(Outcome {
            scenario: self.scenario,
            variant: variant.to_string(),
            control,
            phase,
            verdict,
            expected,
            adversary_succeeded,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            detail,
        });
    }
}

fn verdict_of<T>(r: &Result<T, Rejection>) -> (Phase, Verdict) {
    match r {
        Ok(_) => (Phase::Done, Verdict::Accepted),
        Err(rej) => (rej.phase, Verdict::Rejected(rej.reason)),
    }
}

pub fn scene<R: RngCore>(who: &str, rng: &mut R) -> Vec<u8> {
    let mut noise = [0u8; 24];
    rng.fill_bytes(&mut noise);
    let mut out = SCENE_MARKER.to_vec();
    out.extend_from_slice(format!("{who}:{}", hex::encode(noise)).as_bytes());
    out
}

struct Cast {
    a: Participant,
    b: Participant,
    c: Participant,
}

fn cast<R: RngCore + CryptoRng>(world: &World, rng: &mut R) -> Cast {
    let enroll = |name: &str, look: &str, rng: &mut R| {
        let seed = rng.next_u64();
        world
            .enroll(name, random_mid(rng), seed, look.as_bytes(), rng)
            .expect("fresh random Mids")
    };
    Cast {
        a: enroll("A", "avatar A: silver jacket", rng),
        b: enroll("B", "avatar B: green scarf", rng),
        c: enroll("C", "avatar C: grey hood", rng),
    }
}

fn claim_of(p: &Participant) -> Claim {
    Claim {
        hid: p.avatar.hid,
        hash: p.avatar.hash,
        vid: p.avatar.vid.clone(),
    }
}

/// Drives one contract session with an arbitrary writer-side responder.
fn contract_round<R: RngCore + CryptoRng>(
    world: &World,
    claim: &CtClaim,
    respond: impl FnOnce(&CtChallenge, &mut R) -> CtResponse,
    rng: &mut R,
) -> Result<StoredFi, Rejection> {
    let mut s = ContractSession::new(&world.contract, &world.env);
    let ch = s.on_claim(claim, rng)?;
    let resp = respond(&ch, rng);
    s.on_response(&resp)
}

fn index_written(world: &World, index: &FirstImpressionIndex) -> bool {
    world.env.store.read().ledger_get(&index.to_bytes()).is_some()
}

/// C re-labels an observed `CT_AB` as its own, or redirects it to itself.
fn replacing<R: RngCore + CryptoRng>(world: &World, rng: &mut R) -> Vec<Outcome> {
    let mut run = Run { scenario: Scenario::Replacing, out: Vec::new() };
    let Cast { a, b, c } = cast(world, rng);
    let handoff = fi_create(&a, b.hid(), b.keys.public(), &scene("A", rng), rng).expect("non-empty scene");
    let observed = handoff.envelope.clone();
    let forge = |c: &Participant, rng: &mut R| {
        sc(c.keys.secret(), &c.avatar.hash, &[0u8; 16], &world.env.contract_pk, rng).expect("non-empty")
    };

    let expected = Verdict::Rejected(RejectReason::VcFalse);
    let variants: [(&str, FirstImpressionIndex, &Participant); 3] = [
        ("baseline", FirstImpressionIndex::new(c.hid(), b.hid()), &c),
        ("owner-substitution", FirstImpressionIndex::new(c.hid(), b.hid()), &a),
        ("writer-substitution", FirstImpressionIndex::new(a.hid(), c.hid()), &a),
    ];
    for (variant, index, owner) in variants {
        let started = Instant::now();
        let claim = CtClaim {
            index: index.to_bytes().to_vec(),
            envelope: observed.clone(),
            owner_hash: owner.avatar.hash,
            owner_vid: owner.avatar.vid.clone(),
        };
        let result = contract_round(
            world,
            &claim,
            |_, rng| CtResponse { ct: forge(&c, rng), writer_hash: c.avatar.hash },
            rng,
        );
        let succeeded = result.is_ok() || index_written(world, &index);
        run.push(variant, false, started, verdict_of(&result), expected, succeeded, None);
    }

    let started = Instant::now();
    let mut writer = CtWriter::new(&b, handoff, &claim_of(&a));
    let result = writer.claim().and_then(|claim| {
        contract_round(world, &claim, |ch, rng| writer.respond(ch, &world.env.contract_pk, rng).expect("in order"), rng)
    });
    run.push("control", true, started, verdict_of(&result), Verdict::Accepted, false, None);
    run.out
}

/// C tries to get a first impression stored under B's name as writer.
fn forging<R: RngCore + CryptoRng>(world: &World, rng: &mut R) -> Vec<Outcome> {
    let mut run = Run { scenario: Scenario::Forging, out: Vec::new() };
    let Cast { a, b, c } = cast(world, rng);

    // Honest B writes FI_AB; C records the frames.
    let started = Instant::now();
    let handoff = fi_create(&a, b.hid(), b.keys.public(), &scene("A", rng), rng).expect("non-empty scene");
    let mut writer = CtWriter::new(&b, handoff, &claim_of(&a));
    let mut captured = None;
    let result = writer.claim().and_then(|claim| {
        contract_round(
            world,
            &claim,
            |ch, rng| {
                let r = writer.respond(ch, &world.env.contract_pk, rng).expect("in order");
                captured = Some(r.clone());
                r
            },
            rng,
        )
    });
    run.push("control", true, started, verdict_of(&result), Verdict::Accepted, false, None);
    let captured = captured.expect("control reached the response");

    let index = FirstImpressionIndex::new(c.hid(), b.hid());
    let envelope = seal_hybrid(c.keys.secret(), &c.avatar.hash, &scene("C posing as A", rng), b.keys.public(), rng)
        .expect("non-empty scene");
    let claim = CtClaim {
        index: index.to_bytes().to_vec(),
        envelope,
        owner_hash: c.avatar.hash,
        owner_vid: c.avatar.vid.clone(),
    };

    let started = Instant::now();
    let result = contract_round(
        world,
        &claim,
        |ch, rng| CtResponse {
            ct: sc(c.keys.secret(), &c.avatar.hash, &ch.nonce, &world.env.contract_pk, rng).expect("non-empty"),
            writer_hash: b.avatar.hash,
        },
        rng,
    );
    let succeeded = result.is_ok() || index_written(world, &index);
    run.push(
        "baseline",
        false,
        started,
        verdict_of(&result),
        Verdict::Rejected(RejectReason::DscFailure),
        succeeded,
        None,
    );

    let started = Instant::now();
    let result = contract_round(world, &claim, |_, _| captured.clone(), rng);
    let succeeded = result.is_ok() || index_written(world, &index);
    run.push(
        "replay",
        false,
        started,
        verdict_of(&result),
        Verdict::Rejected(RejectReason::StaleChallenge),
        succeeded,
        None,
    );
    run.out
}

/// C presents itself to B as A, or as itself wearing A's appearance.
fn disguise<R: RngCore + CryptoRng>(world: &World, rng: &mut R) -> Vec<Outcome> {
    let mut run = Run { scenario: Scenario::Disguise, out: Vec::new() };
    let Cast { mut a, mut b, c } = cast(world, rng);
    let (sa, sb) = (scene("A", rng), scene("B", rng));
    world.meet(&mut a, &mut b, &sa, &sb, None, rng).expect("honest first meeting");

    let started = Instant::now();
    let result = world.authenticate(&a, &mut b, &sa, &mut Link::new(), rng);
    let (phase, mut verdict) = verdict_of(&result);
    if let Ok(report) = &result {
        if report.recall == Recall::FirstMeeting {
            verdict = Verdict::NotRecognized;
        }
    }
    run.push("control", true, started, (phase, verdict), Verdict::Accepted, false, None);

    // Hid_A: A's public claim, C's keys and eyes.
    let started = Instant::now();
    let mut verifier = AvatarVerifier::new(&b, &world.env);
    let result = verifier.on_claim(&claim_of(&a), rng).and_then(|ch| {
        let live = biometric::sample(&c.iris(), c.noise_rate, rng).expect("valid noise rate");
        let marked = biometric::embed(&live, &ch.nonce).to_bytes();
        let ct = sc(c.keys.secret(), &a.avatar.hash, &marked, b.keys.public(), rng).expect("non-empty");
        verifier.on_response(&ResponseMsg { ct }, rng)
    });
    let succeeded = result.is_ok();
    run.push(
        "hid-a",
        false,
        started,
        verdict_of(&result),
        Verdict::Rejected(RejectReason::DscFailure),
        succeeded,
        None,
    );

    // Hid_C wearing A's visible identity, with and without a prior attempt
    // to plant a first impression under B's name.
    let started = Instant::now();
    let (phase, verdict, succeeded, detail) = lookalike(world, &a, &b, &c, &sa, false, rng);
    run.push("hid-c", false, started, (phase, verdict), Verdict::NotRecognized, succeeded, detail);

    let Cast { a, b, c } = cast(world, rng);
    let started = Instant::now();
    let (phase, verdict, succeeded, detail) = lookalike(world, &a, &b, &c, &sa, true, rng);
    run.push("hid-c-forged-fi", false, started, (phase, verdict), Verdict::NotRecognized, succeeded, detail);
    run.out
}

fn lookalike<R: RngCore + CryptoRng>(
    world: &World,
    a: &Participant,
    b: &Participant,
    c: &Participant,
    a_scene: &[u8],
    forge_first: bool,
    rng: &mut R,
) -> (Phase, Verdict, bool, Option<String>) {
    let mut look = c.clone();
    look.avatar = avatar_create(&c.keys, c.hid(), &a.avatar.vid.message, rng);
    let mut forged_ok = false;
    let mut detail = None;
    if forge_first {
        let index = FirstImpressionIndex::new(c.hid(), b.hid());
        let envelope =
            seal_hybrid(c.keys.secret(), &look.avatar.hash, a_scene, b.keys.public(), rng).expect("non-empty scene");
        let claim = CtClaim {
            index: index.to_bytes().to_vec(),
            envelope,
            owner_hash: look.avatar.hash,
            owner_vid: look.avatar.vid.clone(),
        };
        let forged = contract_round(
            world,
            &claim,
            |ch, rng| CtResponse {
                ct: sc(c.keys.secret(), &c.avatar.hash, &ch.nonce, &world.env.contract_pk, rng).expect("non-empty"),
                writer_hash: b.avatar.hash,
            },
            rng,
        );
        forged_ok = forged.is_ok();
        detail = Some(format!("planted FI_CB: {}", verdict_of(&forged).1));
    }
    // B's copy: the lookalike is not meant to change B's memory for later runs.
    let mut b_view = b.clone();
    match world.authenticate(&look, &mut b_view, &scene("C", rng), &mut Link::new(), rng) {
        Ok(r) => match r.recall {
            Recall::FirstMeeting => (Phase::Challenge, Verdict::NotRecognized, forged_ok, detail),
            Recall::Recognized { .. } => (Phase::Done, Verdict::Accepted, true, detail),
        },
        Err(rej) => (rej.phase, Verdict::Rejected(rej.reason), forged_ok, detail),
    }
}

/// A passive C reads everything public and tries to learn scenes or Mids.
fn privacy<R: RngCore + CryptoRng>(world: &World, rng: &mut R) -> Vec<Outcome> {
    let mut run = Run { scenario: Scenario::Privacy, out: Vec::new() };
    // Probes cover what this run published, so repeated runs stay linear.
    let first_tx = world.env.store.read().ledger.len();
    let Cast { mut a, mut b, c } = cast(world, rng);
    let (sa, sb) = (scene("A", rng), scene("B", rng));
    world.meet(&mut a, &mut b, &sa, &sb, None, rng).expect("honest first meeting");
    let public_hashes = [a.avatar.hash, b.avatar.hash, c.avatar.hash];

    // Open every stored first impression with C's key.
    let started = Instant::now();
    let mut attempts = 0usize;
    let mut opened = 0usize;
    let pair = [a.hid(), b.hid()];
    for index in world.env.fi_indices() {
        if !pair.contains(&index.owner) || !pair.contains(&index.writer) {
            continue;
        }
        let (Ok(Some(envelope)), Ok(owner)) = (world.env.fi_envelope(&index), world.env.mit(&index.owner)) else {
            continue;
        };
        for h in &public_hashes {
            attempts += 1;
            if open_hybrid(&owner.pk, &envelope, h, c.keys.secret()).is_ok() {
                opened += 1;
            }
        }
    }
    run.push(
        "open-envelopes",
        false,
        started,
        (Phase::Verify, if opened == 0 { Verdict::Rejected(RejectReason::DscFailure) } else { Verdict::Accepted }),
        Verdict::Rejected(RejectReason::DscFailure),
        opened > 0,
        Some(format!("{attempts} attempts, {opened} opened")),
    );

    // Dictionary search over Mids.
    let started = Instant::now();
    let mut targets: Vec<Hid> = world.env.registered();
    for index in world.env.fi_indices() {
        targets.push(index.owner);
        targets.push(index.writer);
    }
    targets.sort();
    targets.dedup();
    let mut hits_self = 0usize;
    let mut hits_other = 0usize;
    for i in 0..PREIMAGE_CANDIDATES {
        let candidate = if i == 0 { c.mid.clone() } else { random_mid(rng) };
        if targets.binary_search(&hid_derive(&candidate)).is_ok() {
            if candidate == c.mid {
                hits_self += 1;
            } else {
                hits_other += 1;
            }
        }
    }
    run.push(
        "hid-preimage",
        false,
        started,
        (Phase::Claim, if hits_other == 0 { Verdict::Withheld } else { Verdict::Accepted }),
        Verdict::Withheld,
        hits_other > 0 || hits_self != 1,
        Some(format!(
            "{PREIMAGE_CANDIDATES} candidates, {} targets, {hits_other} foreign hits",
            targets.len()
        )),
    );

    // Plaintext scan of the ledger and content store.
    let started = Instant::now();
    let store = world.env.store.read();
    let mut leaks = 0usize;
    let contains = |hay: &[u8], needle: &[u8]| hay.windows(needle.len()).any(|w| w == needle);
    for tx in &store.ledger.transactions()[first_tx..] {
        let Some(fid) = ContentId::from_slice(&tx.value) else {
            leaks += 1;
            continue;
        };
        if contains(&tx.key, SCENE_MARKER) || store.content.get(&fid).is_ok_and(|b| contains(&b, SCENE_MARKER)) {
            leaks += 1;
        }
    }
    drop(store);
    run.push(
        "ledger-scan",
        false,
        started,
        (Phase::Claim, if leaks == 0 { Verdict::Withheld } else { Verdict::Accepted }),
        Verdict::Withheld,
        leaks > 0,
        None,
    );

    // The legitimate writer can open it.
    let started = Instant::now();
    let index = FirstImpressionIndex::new(a.hid(), b.hid());
    let ok = world
        .env
        .fi_envelope(&index)
        .ok()
        .flatten()
        .and_then(|env| open_hybrid(a.keys.public(), &env, &a.avatar.hash, b.keys.secret()).ok())
        .is_some_and(|s| s == sa);
    let verdict = if ok { Verdict::Accepted } else { Verdict::Rejected(RejectReason::FiDecrypt) };
    run.push("control", true, started, (Phase::Done, verdict), Verdict::Accepted, false, None);
    run.out
}

/// One run of `scenario` against `world`.
pub fn run_once<R: RngCore + CryptoRng>(scenario: Scenario, world: &World, rng: &mut R) -> Vec<Outcome> {
    match scenario {
        Scenario::Replacing => replacing(world, rng),
        Scenario::Forging => forging(world, rng),
        Scenario::Disguise => disguise(world, rng),
        Scenario::Privacy => privacy(world, rng),
    }
}

/// `runs` sequential runs sharing one world, seeded from `seed`.
pub fn run(scenario: Scenario, runs: usize, world: &World, seed: u64) -> Vec<Outcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..runs).flat_map(|_| run_once(scenario, world, &mut rng)).collect()
}

/// `runs` runs spread over `threads` threads against one shared world.
pub fn run_concurrent(scenario: Scenario, runs: usize, threads: usize, world: &World, seed: u64) -> Vec<Outcome> {
    let threads = threads.max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let share = runs / threads + usize::from(t < runs % threads);
                s.spawn(move || run(scenario, share, world, seed.wrapping_add(t as u64 + 1)))
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub attacks: usize,
    pub attacks_as_expected: usize,
    pub adversary_successes: usize,
    pub controls: usize,
    pub controls_accepted: usize,
    pub verdicts: BTreeMap<String, usize>,
    pub median_ms: f64,
}

impl Summary {
    pub fn of(outcomes: &[Outcome]) -> Self {
        let mut s = Summary::default();
        let mut times: Vec<f64> = outcomes.iter().map(|o| o.elapsed_ms).collect();
        times.sort_by(f64::total_cmp);
        s.median_ms = times.get(times.len() / 2).copied().unwrap_or(0.0);
        for o in outcomes {
            if o.control {
                s.controls += 1;
                s.controls_accepted += usize::from(o.verdict == Verdict::Accepted);
            } else {
                s.attacks += 1;
                s.attacks_as_expected += usize::from(o.as_expected());
                s.adversary_successes += usize::from(o.adversary_succeeded);
                *s.verdicts.entry(format!("{}/{}", o.variant, o.verdict)).or_default() += 1;
            }
        }
        s.runs = s.controls;
        s
    }

    pub fn all_held(&self) -> bool {
        self.attacks == self.attacks_as_expected && self.adversary_successes == 0 && self.controls == self.controls_accepted
    }
}
