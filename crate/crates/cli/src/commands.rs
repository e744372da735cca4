use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chsc_core::attacks::{self, Outcome, Scenario, Summary};
use chsc_core::chameleon::keygen;
use chsc_core::group::{setup, Profile};
use chsc_core::identity::{avatar_create, mit_verify, FirstImpressionIndex, Hid, Mid, Mit};
use chsc_core::ledger::{ContentId, Namespace, StoreError};
use chsc_core::metrics::{self, HostInfo};
use chsc_core::protocols::world::{sample_scene, CtField, Tamper, World};
use chsc_core::protocols::Recall;
use chsc_core::signcryption::{open_hybrid, HybridEnvelope};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::workspace::{valid_name, Config, Workspace, FORMAT_VERSION};
use crate::{AttackArgs, BenchArgs, Cli, Command, LedgerAction, MeetArgs, RegisterArgs, ScenarioArg, Suite, TamperPoint};

pub struct Output {
    pub text: String,
    pub json: Value,
    pub exit_code: u8,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Output { text, json, exit_code: 0 }
    }
}

/// A ChaCha20 stream for one command. With `--seed`, it is derived from the
/// seed, the command's label and the workspace state so that repeated
/// commands do not reuse randomness; otherwise it is seeded from the OS.
fn rng_for(seed: Option<u64>, label: &str, state: u64) -> ChaCha20Rng {
    match seed {
        None => ChaCha20Rng::from_entropy(),
        Some(seed) => {
            let mut h = Sha256::new();
            h.update(b"chsc-cli-rng");
            h.update(seed.to_be_bytes());
            h.update(state.to_be_bytes());
            h.update(label.as_bytes());
            ChaCha20Rng::from_seed(h.finalize().into())
        }
    }
}

fn store_err(e: StoreError) -> CliError {
    match e {
        StoreError::DuplicateKey(k) => CliError::Storage(format!("already-written: {k}")),
        StoreError::Io(m) => CliError::Io(m),
        other => CliError::Storage(other.to_string()),
    }
}

pub fn run(cli: Cli) -> Result<Output, CliError> {
    let Cli {
        workspace,
        seed,
        profile,
        command,
        ..
    } = cli;
    match command {
        Command::Setup { security, force } => cmd_setup(&workspace, &profile, security, force, seed),
        Command::Keygen { out } => cmd_keygen(out.as_deref(), seed),
        Command::Register(args) => cmd_register(&workspace, &profile, args, seed),
        Command::AvatarCreate { name, visible } => cmd_avatar_create(&workspace, &profile, &name, &visible, seed),
        Command::Meet(args) => cmd_meet(&workspace, &profile, args, seed),
        Command::Attack(args) => cmd_attack(args, seed),
        Command::Bench(args) => cmd_bench(args, seed),
        Command::VerifyWorkspace => cmd_verify(&workspace, &profile),
        Command::Ledger { action: LedgerAction::Dump } => cmd_ledger_dump(&workspace, &profile),
    }
}

fn cmd_setup(root: &Path, profile: &str, security: u32, force: bool, seed: Option<u64>) -> Result<Output, CliError> {
    let profile = Profile::from_name(profile).map_err(|e| CliError::Usage(e.to_string()))?;
    let params = setup(security).map_err(|e| CliError::Usage(e.to_string()))?;
    if Workspace::exists(root) {
        if !force {
            return Err(CliError::Usage(format!(
                "workspace {} already exists (use --force to replace it)",
                root.display()
            )));
        }
        fs::remove_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
    }
    let mut rng = rng_for(seed, "setup", 0);
    let mut idp_seed = [0u8; 32];
    rng.fill_bytes(&mut idp_seed);
    let contract = keygen(&params, &mut rng);
    let ws = Workspace::create(
        root,
        Config {
            version: FORMAT_VERSION,
            profile: profile.name().to_string(),
            security_bits: security,
            idp_seed,
            next_serial: 1,
            contract,
            meetings: 0,
        },
    )?;
    let json = json!({
        "workspace": root.display().to_string(),
        "profile": profile.name(),
        "security_bits": security,
        "group_order_bits": params.group_order_bits(),
        "element_bits": params.element_bits(),
        "idp_public_key": hex::encode(ws.world.env.idp.as_bytes()),
        "contract_public_key": hex::encode(ws.world.env.contract_pk.encode()),
    });
    let text = format!(
        "workspace {} created\nprofile {} ({} security bits, {}-bit group order, {}-bit elements)\nidp key {}\ncontract key {}\n",
        root.display(),
        profile.name(),
        security,
        params.group_order_bits(),
        params.element_bits(),
        json["idp_public_key"].as_str().unwrap_or_default(),
        json["contract_public_key"].as_str().unwrap_or_default(),
    );
    Ok(Output::ok(text, json))
}

fn cmd_keygen(out: Option<&Path>, seed: Option<u64>) -> Result<Output, CliError> {
    let params = setup(128).expect("supported");
    let mut rng = rng_for(seed, "keygen", 0);
    let kp = keygen(&params, &mut rng);
    let public = hex::encode(kp.public().encode());
    if let Some(path) = out {
        let file = json!({ "version": FORMAT_VERSION, "keypair": kp });
        fs::write(path, serde_json::to_string_pretty(&file).expect("json") + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let text = match out {
        Some(p) => format!("public key {public}\nkey pair written to {}\n", p.display()),
        None => format!("public key {public}\n"),
    };
    Ok(Output::ok(text, json!({ "public_key": public, "written_to": out.map(|p| p.display().to_string()) })))
}

fn parse_mid(args: &RegisterArgs, rng: &mut ChaCha20Rng) -> Result<Mid, CliError> {
    let usage = |e: chsc_core::Error| CliError::Usage(e.to_string());
    match (&args.mid, args.country, args.district, args.date, args.psn) {
        (Some(m), ..) => Mid::parse(m).map_err(usage),
        (None, Some(c), Some(d), Some(date), Some(p)) => Mid::build(c, d, date, p).map_err(usage),
        (None, None, None, None, None) => Ok(chsc_core::protocols::world::random_mid(rng)),
        _ => Err(CliError::Usage("give --mid, or all of --country --district --date --psn".into())),
    }
}

fn cmd_register(root: &Path, profile: &str, args: RegisterArgs, seed: Option<u64>) -> Result<Output, CliError> {
    if !valid_name(&args.name) {
        return Err(CliError::Usage(format!(
            "participant name {:?} must be 1-64 characters of [A-Za-z0-9_-]",
            args.name
        )));
    }
    let mut ws = Workspace::open(root, profile)?;
    if ws.participants.contains_key(&args.name) {
        return Err(CliError::Usage(format!("participant {} already exists", args.name)));
    }
    let mut rng = rng_for(seed, &format!("register/{}", args.name), ws.state_counter());
    let mid = parse_mid(&args, &mut rng)?;
    let iris_seed = args.iris_seed.unwrap_or_else(|| rng.next_u64());
    let visible = args.visible.clone().unwrap_or_else(|| format!("avatar of {}", args.name));
    let p = ws
        .world
        .enroll(&args.name, mid, iris_seed, visible.as_bytes(), &mut rng)
        .map_err(store_err)?;
    let json = json!({
        "name": p.name,
        "mid": p.mid.as_str(),
        "hid": p.hid().to_hex(),
        "public_key": hex::encode(p.keys.public().encode()),
        "avatar_hash": hex::encode(p.avatar.hash.encode()),
        "iris_seed": iris_seed,
    });
    let text = format!(
        "registered {} (Mid {})\nHid {}\navatar hash {}\n",
        p.name,
        p.mid,
        p.hid(),
        json["avatar_hash"].as_str().unwrap_or_default()
    );
    ws.participants.insert(p.name.clone(), p);
    ws.save()?;
    Ok(Output::ok(text, json))
}

fn cmd_avatar_create(root: &Path, profile: &str, name: &str, visible: &str, seed: Option<u64>) -> Result<Output, CliError> {
    let mut ws = Workspace::open(root, profile)?;
    let state = ws.state_counter();
    let p = ws
        .participants
        .get_mut(name)
        .ok_or_else(|| CliError::Usage(format!("no participant named {name}")))?;
    let mut rng = rng_for(seed, &format!("avatar/{name}/{visible}"), state);
    p.avatar = avatar_create(&p.keys, p.hid(), visible.as_bytes(), &mut rng);
    let hash = hex::encode(p.avatar.hash.encode());
    let stale = !p.recollections.is_empty();
    let text = format!(
        "{name}: new avatar hash {hash}{}\n",
        if stale {
            "\nnote: first impressions sealed under the previous avatar can no longer be recalled"
        } else {
            ""
        }
    );
    let json = json!({ "name": name, "avatar_hash": hash, "visible": visible });
    ws.save()?;
    Ok(Output::ok(text, json))
}

fn read_scene(path: Option<&Path>, label: &str) -> Result<Vec<u8>, CliError> {
    match path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            if bytes.is_empty() {
                return Err(CliError::Usage(format!("scene file {} is empty", p.display())));
            }
            Ok(bytes)
        }
        None => Ok(sample_scene(label)),
    }
}

fn recall_text(r: &Recall) -> &'static str {
    match r {
        Recall::FirstMeeting => "first-meeting",
        Recall::Recognized { .. } => "match",
    }
}

fn cmd_meet(root: &Path, profile: &str, args: MeetArgs, seed: Option<u64>) -> Result<Output, CliError> {
    let mut ws = Workspace::open(root, profile)?;
    if args.a == args.b {
        return Err(CliError::Usage("a participant cannot meet itself".into()));
    }
    for name in [&args.a, &args.b] {
        if !ws.participants.contains_key(name) {
            return Err(CliError::Reject(format!("mit-missing: {name} is not registered")));
        }
    }
    let scene_a = read_scene(args.scene_a.as_deref(), &args.a)?;
    let scene_b = read_scene(args.scene_b.as_deref(), &args.b)?;
    let mut rng = rng_for(seed, &format!("meet/{}/{}", args.a, args.b), ws.state_counter());
    let tamper = args.tamper.map(|t| {
        let bit = (rng.next_u32() % 384) as usize;
        let field = match t {
            TamperPoint::ZBitFlip => CtField::Z,
            TamperPoint::KBitFlip => CtField::K,
            TamperPoint::RBitFlip => CtField::R,
        };
        Tamper::response_bit(field, bit)
    });

    let mut a = ws.participants.remove(&args.a).expect("checked");
    let mut b = ws.participants.remove(&args.b).expect("checked");
    let result = ws.world.meet(&mut a, &mut b, &scene_a, &scene_b, tamper, &mut rng);
    ws.participants.insert(a.name.clone(), a);
    ws.participants.insert(b.name.clone(), b);
    ws.config.meetings += 1;
    let transcript_name = format!("{:04}-{}-{}.log", ws.config.meetings, args.a, args.b);

    let out = match result {
        Ok(report) => {
            let path = ws.write_transcript(&transcript_name, &report.transcript.render())?;
            let mut text = String::new();
            for d in &report.directions {
                let _ = writeln!(text, "{} -> {}: authenticated, recall: {}", d.prover, d.verifier, recall_text(&d.recall));
                let _ = writeln!(
                    text,
                    "  session key {} {} / {} {} ({})",
                    d.prover,
                    d.prover_key,
                    d.verifier,
                    d.verifier_key,
                    if d.keys_agree { "equal" } else { "DIFFERENT" }
                );
                if let Some(fi) = &d.first_impression {
                    let _ = writeln!(text, "  first impression stored at seq {} (FID {})", fi.seq, fi.fid);
                }
                let _ = writeln!(text, "  {:.1} ms", d.elapsed_ms);
            }
            let _ = writeln!(text, "transcript {} ({} messages)", path.display(), report.transcript.entries.len());
            let json = json!({
                "result": "accepted",
                "directions": report.directions,
                "transcript_file": path.display().to_string(),
                "messages": report.transcript.entries.len(),
            });
            let keys_agree = report.directions.iter().all(|d| d.keys_agree);
            Output {
                text,
                json,
                exit_code: if keys_agree { 0 } else { 2 },
            }
        }
        Err(failure) => {
            let path = ws.write_transcript(&transcript_name, &failure.transcript.render())?;
            let r = failure.rejection;
            let text = format!(
                "{} -> {}: rejected at {}: {}\ntranscript {}\n",
                failure.prover,
                failure.verifier,
                r.phase,
                r.reason,
                path.display()
            );
            let json = json!({
                "result": "rejected",
                "prover": failure.prover,
                "verifier": failure.verifier,
                "phase": r.phase,
                "reason": r.reason,
                "transcript_file": path.display().to_string(),
            });
            Output { text, json, exit_code: 2 }
        }
    };
    ws.save()?;
    Ok(out)
}

#[derive(Serialize)]
struct ScenarioReport {
    scenario: Scenario,
    runs: usize,
    threads: usize,
    held: bool,
    summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcomes: Option<Vec<Outcome>>,
}

fn cmd_attack(args: AttackArgs, seed: Option<u64>) -> Result<Output, CliError> {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    let scenarios: Vec<Scenario> = match args.scenario {
        ScenarioArg::Replacing => vec![Scenario::Replacing],
        ScenarioArg::Forging => vec![Scenario::Forging],
        ScenarioArg::Disguise => vec![Scenario::Disguise],
        ScenarioArg::Privacy => vec![Scenario::Privacy],
        ScenarioArg::All => Scenario::ALL.to_vec(),
    };
    let mut rng = rng_for(seed, "attack", 0);
    let world = World::new(setup(128).expect("supported"), &mut rng);
    let mut reports = Vec::new();
    let mut text = String::new();
    for scenario in scenarios {
        let run_seed = rng.next_u64();
        let outcomes = if args.threads > 1 {
            attacks::run_concurrent(scenario, args.runs, args.threads, &world, run_seed)
        } else {
            attacks::run(scenario, args.runs, &world, run_seed)
        };
        let summary = Summary::of(&outcomes);
        let held = summary.all_held();
        let _ = writeln!(
            text,
            "{scenario}: {} runs, {}/{} attacks rejected as expected, {} adversary successes, {}/{} controls accepted -> {}",
            summary.runs,
            summary.attacks_as_expected,
            summary.attacks,
            summary.adversary_successes,
            summary.controls_accepted,
            summary.controls,
            if held { "held" } else { "NOT HELD" }
        );
        for (k, n) in &summary.verdicts {
            let _ = writeln!(text, "  {k}: {n}");
        }
        reports.push(ScenarioReport {
            scenario,
            runs: args.runs,
            threads: args.threads,
            held,
            summary,
            outcomes: args.outcomes.then_some(outcomes),
        });
    }
    let held = reports.iter().all(|r| r.held);
    Ok(Output {
        text,
        json: json!({ "scenarios": reports, "held": held }),
        exit_code: if held { 0 } else { 2 },
    })
}

fn cmd_bench(args: BenchArgs, seed: Option<u64>) -> Result<Output, CliError> {
    if args.iterations == 0 {
        return Err(CliError::Usage("--iterations must be positive".into()));
    }
    let seed = seed.unwrap_or_else(|| rand_core::OsRng.next_u64());
    let host = HostInfo::current();
    let mut text = format!("host {} {} ({} cpus, {} build)\n", host.os, host.arch, host.cpus, host.build);
    let json = match args.suite {
        Suite::Ops => {
            let ops = metrics::time_ops(args.iterations, seed);
            for o in &ops {
                let _ = writeln!(
                    text,
                    "{:<8} n={:<5} median {:>8.3} ms  (min {:.3}, max {:.3}, {} runs)",
                    o.op, o.message_bits, o.median_ms, o.min_ms, o.max_ms, o.iterations
                );
            }
            json!({ "host": host, "ops": ops })
        }
        Suite::Meet => {
            let t = metrics::time_second_meet(args.iterations, seed)
                .map_err(|r| CliError::Reject(r.to_string()))?;
            let _ = writeln!(text, "first meeting (with two first-impression writes): {:.1} ms", t.first_meeting_ms);
            let _ = writeln!(
                text,
                "mutual meeting with recall: median {:.1} ms over {} runs",
                t.median_second_meeting_ms, t.iterations
            );
            json!({ "host": host, "meet": t })
        }
        Suite::Storage => {
            let rows = metrics::storage_profile(&args.friends, seed).map_err(|r| CliError::Reject(r.to_string()))?;
            let _ = writeln!(text, "friends  records  reserved_bytes  budget_bytes  used_bytes  max_mit_bytes");
            for r in &rows {
                let _ = writeln!(
                    text,
                    "{:>7}  {:>7}  {:>14}  {:>12}  {:>10}  {:>13}",
                    r.friends, r.fi_records, r.reserved_bytes, r.budget_bytes, r.used_bytes, r.max_mit_bytes
                );
            }
            json!({ "host": host, "storage": rows })
        }
    };
    Ok(Output::ok(text, json))
}

#[derive(Serialize)]
struct Check {
    check: String,
    ok: bool,
}

fn cmd_verify(root: &Path, profile: &str) -> Result<Output, CliError> {
    let ws = Workspace::open(root, profile)?;
    let env = &ws.world.env;
    let mut checks = Vec::new();
    let mut push = |check: String, ok: bool| checks.push(Check { check, ok });

    let store = env.store.read();
    for tx in store.ledger.transactions() {
        let label = format!("{:?} seq {}", tx.namespace, tx.seq);
        let Some(fid) = ContentId::from_slice(&tx.value) else {
            push(format!("{label}: value is a FID"), false);
            continue;
        };
        let content = match store.content.get(&fid) {
            Ok(c) => c,
            Err(e) => {
                push(format!("{label}: content {fid}: {e}"), false);
                continue;
            }
        };
        match tx.namespace {
            Namespace::MitIndex => {
                let ok = Mit::from_bytes(&content)
                    .map(|m| m.hid.as_bytes()[..] == tx.key[..] && mit_verify(&env.idp, &m))
                    .unwrap_or(false);
                push(format!("{label}: MIT {} signature", hex::encode(&tx.key)), ok);
            }
            Namespace::FiIndex => {
                let ok = FirstImpressionIndex::from_bytes(&tx.key).is_ok() && HybridEnvelope::from_bytes(&content).is_ok();
                push(format!("{label}: first impression {} parses", hex::encode(&tx.key)), ok);
            }
            _ => push(format!("{label}: namespace is an index"), false),
        }
    }
    drop(store);

    for p in ws.participants.values() {
        let mit = env.mit(&p.hid());
        push(
            format!("{}: MIT registered and signed", p.name),
            mit.is_ok(),
        );
        if let Ok(mit) = &mit {
            push(format!("{}: MIT key matches key pair", p.name), mit.pk == *p.keys.public());
        }
        push(
            format!("{}: key pair consistent", p.name),
            p.keys.public().is_consistent() && *p.keys.public() == p.keys.secret().public_key(),
        );
        push(
            format!("{}: avatar VID opens the avatar hash", p.name),
            p.avatar.hid == p.hid() && p.avatar.is_consistent(p.keys.public()),
        );
        for (owner_hid, rec) in &p.recollections {
            let owner = ws.participants.values().find(|o| o.hid() == *owner_hid);
            let index = FirstImpressionIndex::new(*owner_hid, p.hid());
            let opened = match (env.fi_envelope(&index), env.mit(owner_hid), owner) {
                (Ok(Some(envelope)), Ok(owner_mit), Some(owner)) => {
                    open_hybrid(&owner_mit.pk, &envelope, &owner.avatar.hash, p.keys.secret())
                        .map(|scene| Sha256::digest(&scene)[..] == rec.scene_digest[..])
                        .unwrap_or(false)
                }
                (Ok(Some(_)), Ok(_), None) => true,
                _ => false,
            };
            push(format!("{}: first impression from {} opens and matches", p.name, short(owner_hid)), opened);
        }
    }
    push(
        "contract key pair consistent".into(),
        ws.config.contract.public().is_consistent() && *ws.config.contract.public() == env.contract_pk,
    );

    let failed = checks.iter().filter(|c| !c.ok).count();
    let mut text = String::new();
    for c in &checks {
        let _ = writeln!(text, "{} {}", if c.ok { "ok  " } else { "FAIL" }, c.check);
    }
    let _ = writeln!(text, "{} checks, {} failed", checks.len(), failed);
    let json = json!({ "checks": checks, "failed": failed });
    if failed > 0 {
        print!("{text}");
        return Err(CliError::Storage(format!("{failed} workspace checks failed")));
    }
    Ok(Output::ok(text, json))
}

fn short(h: &Hid) -> String {
    h.to_hex()[..12].to_string()
}

fn cmd_ledger_dump(root: &Path, profile: &str) -> Result<Output, CliError> {
    let ws = Workspace::open(root, profile)?;
    let store = ws.world.env.store.read();
    let text = store.ledger.dump();
    let entries: Vec<Value> = store
        .ledger
        .transactions()
        .iter()
        .map(|tx| {
            json!({
                "seq": tx.seq,
                "namespace": format!("{:?}", tx.namespace),
                "key": hex::encode(&tx.key),
                "value": hex::encode(&tx.value),
            })
        })
        .collect();
    Ok(Output::ok(text, json!({ "entries": entries })))
}
