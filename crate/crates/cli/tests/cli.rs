use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SAMPLE_MID: &str = "15611010520240601301107";

fn chsc(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chsc"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let o = chsc(ws, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}\n{}\n{}", stdout(&o), stderr(&o));
    stdout(&o)
}

fn pair(ws: &Path, seed: &str) {
    ok(ws, &["--seed", seed, "setup"]);
    ok(ws, &["--seed", seed, "register", "alice", "--mid", SAMPLE_MID]);
    ok(ws, &["--seed", seed, "register", "bob", "--country", "156", "--district", "110105", "--date", "19991231", "--psn", "4242"]);
}

#[test]
fn register_fixed_mid_and_refuse_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    pair(&ws, "1");

    let dup = chsc(&ws, &["register", "carol", "--mid", SAMPLE_MID]);
    assert_eq!(dup.status.code(), Some(3));
    assert!(stderr(&dup).contains("already-written"));

    let same_name = chsc(&ws, &["register", "alice"]);
    assert_eq!(same_name.status.code(), Some(1));

    let bad_mid = chsc(&ws, &["register", "dave", "--mid", "123"]);
    assert_eq!(bad_mid.status.code(), Some(1));

    let out = ok(&ws, &["verify-workspace"]);
    assert!(out.contains("0 failed"), "{out}");
}

#[test]
fn second_meeting_recalls_first_impression() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    pair(&ws, "2");

    let first = ok(&ws, &["meet", "alice", "bob"]);
    assert_eq!(first.matches("recall: first-meeting").count(), 2, "{first}");
    assert_eq!(first.matches("(equal)").count(), 2);
    assert_eq!(first.matches("first impression stored").count(), 2);

    let second = ok(&ws, &["meet", "bob", "alice"]);
    assert_eq!(second.matches("recall: match").count(), 2, "{second}");
    assert!(!second.contains("first impression stored"));

    let json: Value = serde_json::from_str(&ok(&ws, &["--report", "json", "meet", "alice", "bob"])).unwrap();
    assert_eq!(json["result"], "accepted");
    assert_eq!(json["directions"].as_array().unwrap().len(), 2);

    let out = ok(&ws, &["verify-workspace"]);
    assert!(out.contains("0 failed"), "{out}");
    let dump = ok(&ws, &["ledger", "dump"]);
    assert_eq!(dump.lines().count(), 4, "two MITs and two first impressions\n{dump}");
}

#[test]
fn tampered_and_unknown_meetings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    pair(&ws, "3");

    for point in ["z-bit-flip", "k-bit-flip", "r-bit-flip"] {
        let o = chsc(&ws, &["--report", "json", "meet", "alice", "bob", "--tamper", point]);
        assert_eq!(o.status.code(), Some(2), "{point}");
        let json: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(json["result"], "rejected");
        assert_eq!(json["reason"], "dsc-failure", "{point}");
    }

    let o = chsc(&ws, &["meet", "alice", "mallory"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mit-missing"));

    // a rejected meeting leaves nothing behind for the next one
    let out = ok(&ws, &["meet", "alice", "bob"]);
    assert_eq!(out.matches("recall: first-meeting").count(), 2, "{out}");
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut transcripts = Vec::new();
    for run in ["a", "b"] {
        let ws = dir.path().join(run);
        pair(&ws, "7");
        ok(&ws, &["--seed", "7", "meet", "alice", "bob"]);
        ok(&ws, &["--seed", "7", "meet", "alice", "bob"]);
        let t: Vec<Vec<u8>> = ["0001-alice-bob.log", "0002-alice-bob.log"]
            .iter()
            .map(|f| fs::read(ws.join("transcripts").join(f)).unwrap())
            .collect();
        transcripts.push(t);
    }
    assert_eq!(transcripts[0], transcripts[1]);
    assert_ne!(transcripts[0][0], transcripts[0][1]);
}

#[test]
fn attack_report_parses_and_holds() {
    let dir = tempfile::tempdir().unwrap();
    let o = chsc(dir.path(), &["--seed", "4", "--report", "json", "attack", "replacing", "--runs", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["held"], true);
    let s = &json["scenarios"][0]["summary"];
    assert_eq!(s["adversary_successes"], 0);
    assert_eq!(s["attacks"], s["attacks_as_expected"]);
}

#[test]
fn bench_storage_reports_reserved_footprint() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--seed", "5", "--report", "json", "bench", "storage", "--friends", "1,2"]);
    let json: Value = serde_json::from_str(&out).unwrap();
    for row in json["storage"].as_array().unwrap() {
        let f = row["friends"].as_u64().unwrap();
        assert_eq!(row["reserved_bytes"].as_u64().unwrap(), f * 33 * 1024);
        assert!(row["max_mit_bytes"].as_u64().unwrap() <= 256 * 1024);
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("missing");
    assert_eq!(chsc(&ws, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(chsc(&ws, &["meet", "a", "b"]).status.code(), Some(1));
    assert_eq!(chsc(&ws, &["attack", "replacing", "--runs", "0"]).status.code(), Some(1));
    let o = chsc(&ws, &["--report", "json", "verify-workspace"]);
    assert_eq!(o.status.code(), Some(1));
    let json: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["error"], "usage");
}

#[test]
fn keygen_writes_key_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    let out = ok(dir.path(), &["--seed", "9", "keygen", "--out", path.to_str().unwrap()]);
    let file: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(file["version"], 1);
    assert!(out.starts_with("public key "));
    let again = ok(dir.path(), &["--seed", "9", "keygen"]);
    assert_eq!(out.lines().next(), again.lines().next());
}
