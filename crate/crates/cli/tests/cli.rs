//! End-to-end runs of the `agmon` binary over the bundled case-study files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agmon_core::case_study::{apply_deviation, generate_conforming, Deviation};
use agmon_core::files::events_to_jsonl;

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(file)
}

fn agmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agmon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn extract_annotate_monitor_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let skeleton = dir.path().join("skeleton.json");
    let machine = dir.path().join("monitor.efsm.json");
    let events = dir.path().join("events.jsonl");

    let out = agmon(&[
        "extract",
        "--cfg",
        &path_str(&data("listing1.cfg.json")),
        "--apis",
        &path_str(&data("apis.json")),
        "--mode",
        "plain",
        "--out",
        &path_str(&skeleton),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = agmon(&[
        "annotate",
        "--skeleton",
        &path_str(&skeleton),
        "--spec",
        &path_str(&data("gps.annotations.json")),
        "--out",
        &path_str(&machine),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // conforming stream: no alarms, exit 0
    let conforming = generate_conforming(20, 5).project(&["time", "lat", "lon"]);
    std::fs::write(&events, events_to_jsonl(&conforming)).unwrap();
    let out = agmon(&[
        "monitor",
        "--efsm",
        &path_str(&machine),
        "--events",
        &path_str(&events),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // an out-of-range latitude: alarms, exit 1
    let mut bad = conforming.clone();
    bad.events[1] = agmon_core::Event::float("lat", 120.0);
    std::fs::write(&events, events_to_jsonl(&bad)).unwrap();
    let out = agmon(&[
        "monitor",
        "--efsm",
        &path_str(&machine),
        "--events",
        &path_str(&events),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["alarms"][0]["position"], 1);
}

#[test]
fn verify_both_listings_and_a_mutant() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in ["listing1.cfg.json", "listing2.cfg.json"] {
        let external = dir.path().join(format!("{cfg}.external.json"));
        let out = agmon(&[
            "build-external",
            "--cfg",
            &path_str(&data(cfg)),
            "--apis",
            &path_str(&data("apis.json")),
            "--spec",
            &path_str(&data("gps.annotations.json")),
            "--out",
            &path_str(&external),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );

        let out = agmon(&[
            "verify",
            "--assumption",
            &path_str(&data("assumption.efsm.json")),
            "--candidate",
            &path_str(&external),
            "--seed",
            "1",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
    }

    // tighten the latitude guard and watch the verdict flip
    let external = dir.path().join("listing1.cfg.json.external.json");
    let text = std::fs::read_to_string(&external).unwrap();
    let mutated_text = text
        .replace("c >= -90.0", "c >= -45.0")
        .replace("c <= 90.0", "c <= 45.0");
    assert_ne!(text, mutated_text);
    let mutated = dir.path().join("mutant.json");
    std::fs::write(&mutated, mutated_text).unwrap();
    let out = agmon(&[
        "verify",
        "--assumption",
        &path_str(&data("assumption.efsm.json")),
        "--candidate",
        &path_str(&mutated),
        "--seed",
        "1",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let verdict: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["status"], "falsified");
    assert!(verdict["witness"].as_array().is_some_and(|w| !w.is_empty()));
}

#[test]
fn verify_reports_unknown_when_implication_cannot_close() {
    // the candidate phrases the latitude bound through a state variable;
    // inclusion holds but cannot be proven, and differential testing finds
    // nothing, so the verdict is Unknown with exit code 2
    let dir = tempfile::tempdir().unwrap();
    let candidate = dir.path().join("opaque-guard.efsm.json");
    std::fs::write(
        &candidate,
        r#"{
  "locations": ["s0", "s1", "s2"],
  "start": "s0",
  "channels": [
    {"name": "time", "type": "int"},
    {"name": "lat", "type": "float"},
    {"name": "lon", "type": "float"},
    {"name": "newline", "type": "unit"},
    {"name": "alt", "type": "float"}
  ],
  "variables": [
    {"name": "last_time", "type": "int", "init": 0},
    {"name": "first", "type": "bool", "init": true},
    {"name": "lower", "type": "float", "init": -90.0}
  ],
  "transitions": [
    {"from": "s0", "to": "s0", "channel": "newline", "guard": [], "update": [],
     "origin": "api_effect_self_loop"},
    {"from": "s1", "to": "s1", "channel": "newline", "guard": [], "update": [],
     "origin": "api_effect_self_loop"},
    {"from": "s2", "to": "s2", "channel": "newline", "guard": [], "update": [],
     "origin": "api_effect_self_loop"},
    {"from": "s0", "to": "s1", "channel": "time",
     "guard": ["c >= 0", "first || c >= last_time"],
     "update": ["last_time := c", "first := false"]},
    {"from": "s1", "to": "s2", "channel": "lat",
     "guard": ["c >= lower", "c <= 90.0"], "update": []},
    {"from": "s2", "to": "s0", "channel": "lon",
     "guard": ["c >= -180.0", "c <= 180.0"], "update": []}
  ]
}"#,
    )
    .unwrap();
    let out = agmon(&[
        "verify",
        "--assumption",
        &path_str(&data("assumption.efsm.json")),
        "--candidate",
        &path_str(&candidate),
        "--seed",
        "1",
        "--traces",
        "200",
        "--format",
        "json",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let verdict: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["status"], "unknown");
    assert!(!verdict["obligations"].as_array().unwrap().is_empty());
}

#[test]
fn deviations_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let external = dir.path().join("external.json");
    agmon(&[
        "build-external",
        "--cfg",
        &path_str(&data("listing1.cfg.json")),
        "--apis",
        &path_str(&data("apis.json")),
        "--spec",
        &path_str(&data("gps.annotations.json")),
        "--out",
        &path_str(&external),
    ]);
    let out = agmon(&[
        "deviations",
        "--assumption",
        &path_str(&data("assumption.efsm.json")),
        "--candidate",
        &path_str(&external),
        "--bound",
        "5",
        "--seed",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn case_study_prints_the_matrix() {
    let out = agmon(&["case-study", "--n", "100", "--seed", "1"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("scanf"), "{text}");
    assert!(text.contains("getline_sscanf"));
    assert!(text.contains("extra_altitude"));
    assert!(text.contains("drop_newlines"));

    let out = agmon(&["case-study", "--n", "50", "--seed", "3", "--format", "json"]);
    let matrix: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(matrix["cells"].as_array().unwrap().len(), 6);
}

#[test]
fn monitor_on_empty_stream_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("empty.jsonl");
    std::fs::write(&events, "").unwrap();
    let out = agmon(&[
        "monitor",
        "--efsm",
        &path_str(&data("assumption.efsm.json")),
        "--events",
        &path_str(&events),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 event(s) observed"));
}

#[test]
fn monitor_exit_on_deviated_streams_matches_the_story() {
    // the scanf monitor misses dropped newlines entirely
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("d2.jsonl");
    let d2 = apply_deviation(&generate_conforming(10, 4), &Deviation::DropNewlines, 0);
    std::fs::write(&events, events_to_jsonl(&d2)).unwrap();
    let skeleton = dir.path().join("sk.json");
    let machine = dir.path().join("m.json");
    agmon(&[
        "extract",
        "--cfg",
        &path_str(&data("listing1.cfg.json")),
        "--apis",
        &path_str(&data("apis.json")),
        "--out",
        &path_str(&skeleton),
    ]);
    agmon(&[
        "annotate",
        "--skeleton",
        &path_str(&skeleton),
        "--spec",
        &path_str(&data("gps.annotations.json")),
        "--out",
        &path_str(&machine),
    ]);
    let out = agmon(&[
        "monitor",
        "--efsm",
        &path_str(&machine),
        "--events",
        &path_str(&events),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn exit_codes_for_bad_invocations() {
    // unknown flag: usage error
    let out = agmon(&["verify", "--nonsense"]);
    assert_eq!(out.status.code(), Some(64));

    // missing seed on a randomized command: usage error
    let out = agmon(&["case-study", "--n", "5"]);
    assert_eq!(out.status.code(), Some(64));

    // missing file: malformed-input exit
    let out = agmon(&[
        "monitor",
        "--efsm",
        "/nonexistent.json",
        "--events",
        "/nonexistent.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(65));

    // malformed machine: error names file and location
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.efsm.json");
    std::fs::write(
        &bad,
        r#"{"locations": ["a"], "start": "a", "channels": [], "variables": [],
           "transitions": [{"from": "a", "to": "a", "channel": "x", "guard": ["c >"], "update": []}]}"#,
    )
    .unwrap();
    let out = agmon(&[
        "monitor",
        "--efsm",
        &path_str(&bad),
        "--events",
        &path_str(&bad),
    ]);
    assert_eq!(out.status.code(), Some(65));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.efsm.json"), "{stderr}");
    assert!(stderr.contains("transitions"), "{stderr}");

    // help is not an error
    let out = agmon(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
