use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const NOW: &str = "1000000000";

fn hbhc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbhc"))
        .args(args)
        .current_dir(dir)
        .env_remove("HBHC_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// keygen, derive-child, heartbeat and prove; returns (hpk_hex, challenge_hex).
fn chain(dir: &Path) -> (String, String) {
    stdout(&hbhc(
        dir,
        &[
            "keygen",
            "--seed-hex",
            &"07".repeat(32),
            "--out",
            "root.key",
        ],
    ));
    stdout(&hbhc(
        dir,
        &[
            "derive-child",
            "--parent-file",
            "root.key",
            "--child-id",
            "root.a",
            "--out",
            "a.key",
        ],
    ));
    let hb = stdout(&hbhc(
        dir,
        &["heartbeat", "--identity-file", "root.key", "--now-ms", NOW],
    ));
    assert_eq!(hb.trim().len(), 2 * 168);
    let challenge = "5c".repeat(32);
    let proof = stdout(&hbhc(
        dir,
        &[
            "prove",
            "--child-file",
            "a.key",
            "--credential-file",
            "a.key.cred",
            "--heartbeat-hex",
            hb.trim(),
            "--challenge-hex",
            &challenge,
        ],
    ));
    std::fs::write(dir.join("proof.json"), proof).unwrap();
    let public: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("root.key.pub")).unwrap()).unwrap();
    (
        public["heartbeat_pk_hex"].as_str().unwrap().to_string(),
        challenge,
    )
}

fn verify(dir: &Path, hpk: &str, challenge: &str, now: &str) -> Output {
    hbhc(
        dir,
        &[
            "verify",
            "--proof-json",
            "proof.json",
            "--parent-hpk-hex",
            hpk,
            "--challenge-hex",
            challenge,
            "--now-ms",
            now,
        ],
    )
}

#[test]
fn fresh_chain_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (hpk, challenge) = chain(dir.path());
    let out = verify(dir.path(), &hpk, &challenge, NOW);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"], "accept");
    assert_eq!(v["heartbeat_age_epochs"], 0);

    // secret and public material are separate files
    let secret = std::fs::read_to_string(dir.path().join("a.key")).unwrap();
    let public = std::fs::read_to_string(dir.path().join("a.key.pub")).unwrap();
    assert!(secret.contains("identity_sk_hex") && !secret.contains("pk_hex"));
    assert!(!public.contains("sk_hex"));
}

#[test]
fn expired_heartbeat_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (hpk, challenge) = chain(dir.path());
    // (max_age + 1) intervals later
    let out = verify(dir.path(), &hpk, &challenge, "1000040000");
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reason"], "HeartbeatExpired");

    let out = verify(dir.path(), &hpk, &"00".repeat(32), NOW);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reason"], "InvalidChildSig");
}

#[test]
fn bad_input_is_a_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hbhc(dir.path(), &["keygen", "--seed-hex", "abcd", "--out", "k"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("expected 32 bytes"));

    let out = hbhc(
        dir.path(),
        &[
            "derive-child",
            "--parent-file",
            "missing",
            "--child-id",
            "x",
            "--out",
            "y",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = hbhc(dir.path(), &["experiment", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heartbeat_variants() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&hbhc(dir.path(), &["keygen", "--out", "r.key"]));
    let frames = stdout(&hbhc(
        dir.path(),
        &[
            "heartbeat",
            "--identity-file",
            "r.key",
            "--now-ms",
            NOW,
            "--precompute",
            "3",
        ],
    ));
    assert_eq!(frames.lines().count(), 3);
    // beyond the pre-computation horizon cap
    let o = hbhc(
        dir.path(),
        &["heartbeat", "--identity-file", "r.key", "--precompute", "4"],
    );
    assert_eq!(o.status.code(), Some(2));
    let sentinel = stdout(&hbhc(
        dir.path(),
        &["heartbeat", "--identity-file", "r.key", "--sentinel"],
    ));
    // epoch field sits after the 32-byte commitment and 64-byte signature
    assert_eq!(&sentinel.trim()[192..208], "ffffffffffffffff");
    let seq = stdout(&hbhc(
        dir.path(),
        &["heartbeat", "--identity-file", "r.key", "--seq", "9"],
    ));
    assert_eq!(&seq.trim()[192..208], "0000000000000009");
}

#[test]
fn experiments_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = hbhc(
            dir.path(),
            &[
                "experiment",
                "sequence_mode",
                "--seed",
                "42",
                "--out-dir",
                out,
            ],
        );
        assert!(stdout(&o).contains("[PASS] sequence_mode"));
        let o = hbhc(
            dir.path(),
            &["experiment", "bandwidth", "--seed", "42", "--out-dir", out],
        );
        assert!(o.status.success());
    }
    for f in ["sequence_mode.csv", "bandwidth.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn simulate_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "spec": { "levels": [2, 2] },
        "delivery": { "variant": "push", "drop_rate": 0.1 },
        "policy": { "interval_ms": 2000, "max_age_epochs": 3 },
        "duration_epochs": 12,
        "revocation_events": [{ "agent": "root.0", "at_epoch": 4 }]
    });
    std::fs::write(dir.path().join("sim.json"), config.to_string()).unwrap();
    let run = |seed: &str, env_seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hbhc"));
        cmd.args([
            "simulate",
            "--config-file",
            "sim.json",
            "--seed",
            seed,
            "--csv-out",
            "trace.csv",
        ])
        .current_dir(dir.path())
        .env_remove("HBHC_SEED");
        if let Some(s) = env_seed {
            cmd.env("HBHC_SEED", s);
        }
        let v: Value = serde_json::from_str(&stdout(&cmd.output().unwrap())).unwrap();
        v
    };
    let v = run("5", None);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["agents"], 7);
    assert_eq!(v["zombie_windows"][0]["revoked"], "root.0");
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv
        .starts_with("epoch,agent_id,level,event_type,outcome,reject_reason,heartbeat_age_epochs"));
    // the environment overrides the flag
    assert_eq!(run("5", Some("9"))["seed"], 9);
}
