//! End-to-end runs of the `xoscgen` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const LEFT_TURN: &str = "Unprotected left turn for traffic vehicle";

fn xoscgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xoscgen"))
        .args(args)
        .env_remove("XOSCGEN_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn demo_texts() -> Vec<String> {
    let cases: Value = serde_json::from_str(include_str!("../../core/data/demo/cases.json")).expect("demo cases parse");
    cases
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["text"].as_str().unwrap().to_string())
        .collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn generate_left_turn_writes_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let run = xoscgen(&[
        "generate",
        "--text",
        LEFT_TURN,
        "--backend",
        "scripted",
        "--seed",
        "11",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["scenario.rep.json", "scenario.xosc", "trace.json"]);
    assert_eq!(stdout_json(&run)["map_id"], "intersection_4way");
    let rep: Value = serde_json::from_slice(&fs::read(out.join("scenario.rep.json")).unwrap()).unwrap();
    assert_eq!(rep["traffic_participants"][0]["longitudinal_oracle"], "yield");
}

#[test]
fn generated_left_turn_matches_the_golden_document() {
    let tmp = tempfile::tempdir().unwrap();
    let run = xoscgen(&[
        "generate",
        "--text",
        LEFT_TURN,
        "--backend",
        "scripted",
        "--seed",
        "11",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&run), 0);
    let golden = fs::read(fixture("left_turn.xosc")).unwrap();
    assert!(
        fs::read(tmp.path().join("scenario.xosc")).unwrap() == golden,
        "left-turn document drifted"
    );
}

#[test]
fn bp_only_left_turn_is_a_parse_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let run = xoscgen(&[
        "generate",
        "--text",
        LEFT_TURN,
        "--backend",
        "scripted",
        "--ablation",
        "BP",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&run), 2);
    let err = stderr_json(&run);
    assert_eq!(err["error"], "parse_failure");
    assert!(err["message"].as_str().unwrap().contains("R1"));
    assert!(tmp.path().join("trace.json").exists());
    assert!(!tmp.path().join("scenario.xosc").exists());
}

#[test]
fn remote_backend_without_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = xoscgen(&[
        "generate",
        "--text",
        LEFT_TURN,
        "--backend",
        "remote",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&run), 5);
    let err = stderr_json(&run);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("XOSCGEN_API_KEY"));
}

#[test]
fn batch_fans_out_texts_by_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let texts = tmp.path().join("texts.txt");
    fs::write(&texts, demo_texts()[..4].join("\n")).unwrap();
    let out = tmp.path().join("out");
    let run = xoscgen(&[
        "batch",
        "--texts",
        s(&texts),
        "--seeds",
        "0,1,2,3",
        "--backend",
        "scripted",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let mut dirs = 0;
    for text in fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
    {
        for item in fs::read_dir(text).unwrap() {
            assert!(item.unwrap().path().join("scenario.xosc").exists());
            dirs += 1;
        }
    }
    assert_eq!(dirs, 16);
    let sum = summary(&out);
    assert_eq!(sum["items"], 16);
    assert_eq!(sum["succeeded"], 16);
    assert!(out.join("summary.csv").exists());
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn batch_survives_a_poisoned_text() {
    let tmp = tempfile::tempdir().unwrap();
    let mut lines = demo_texts()[..9].to_vec();
    lines.insert(4, "Nobody scripted a response for this sentence".into());
    let texts = tmp.path().join("texts.txt");
    fs::write(&texts, lines.join("\n")).unwrap();
    let out = tmp.path().join("out");
    let run = xoscgen(&["batch", "--texts", s(&texts), "--backend", "scripted", "--out", s(&out)]);
    assert_eq!(code(&run), 0);
    let sum = summary(&out);
    assert_eq!(sum["succeeded"], 9);
    assert_eq!(sum["failed"], 1);
    let failure = &sum["failures"][0];
    assert_eq!(failure["id"], "text-005");
    assert_eq!(failure["code"], 5);
    assert!(failure["message"].as_str().unwrap().contains("no scripted response"));
}

#[test]
fn batch_summary_is_reproducible_and_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let texts = tmp.path().join("texts.txt");
    fs::write(&texts, demo_texts()[..6].join("\n")).unwrap();
    let runs: Vec<Vec<u8>> = [("a", "1"), ("b", "4"), ("a", "3")]
        .iter()
        .map(|(dir, workers)| {
            let out = tmp.path().join(dir);
            let run = xoscgen(&[
                "batch",
                "--texts",
                s(&texts),
                "--seeds",
                "5,6",
                "--backend",
                "scripted",
                "--workers",
                workers,
                "--out",
                s(&out),
            ]);
            assert_eq!(code(&run), 0);
            fs::read(out.join("summary.json")).unwrap()
        })
        .collect();
    assert!(runs[0] == runs[1], "worker count changed the summary");
    assert!(runs[0] == runs[2], "rerun changed the summary");
}

#[test]
fn demo_batch_scores_against_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = xoscgen(&["batch", "--demo", "--backend", "scripted", "--out", s(&out)]);
    assert_eq!(code(&run), 0);
    let sum = summary(&out);
    // Parse errors the scripted model makes leave three records the corpus
    // cannot realize; every document that was emitted executes.
    let failures = sum["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 3);
    assert!(failures.iter().all(|f| f["error"] == "assembly_error"));
    assert_eq!(sum["feasibility"]["executable"], 1.0);
    assert_eq!(sum["feasibility"]["total"], 21);
    let rate = sum["success_rate"].as_f64().unwrap();
    assert!((rate - 21.0 / 24.0).abs() < 1e-12);
    let mean = sum["accuracy"]["mean"].as_f64().unwrap();
    assert!((0.9..=1.0).contains(&mean), "mean accuracy {mean}");
    assert!((sum["matching_accuracy"].as_f64().unwrap() - rate * mean).abs() < 1e-12);
    assert!(out.join("accuracy.csv").exists());
}

#[test]
fn manifest_drives_a_batch() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("lt.txt"), LEFT_TURN).unwrap();
    let manifest = serde_json::json!({
        "texts": [{"id": "lt", "file": "lt.txt"}, {"id": "bad", "text": "unscripted"}],
        "seeds": [11],
        "backend": "scripted",
        "out": "out",
    });
    let path = tmp.path().join("manifest.json");
    fs::write(&path, manifest.to_string()).unwrap();
    let run = xoscgen(&["batch", "--manifest", s(&path)]);
    assert_eq!(code(&run), 0);
    let out = tmp.path().join("out");
    assert_eq!(
        fs::read(out.join("lt/seed-11/scenario.xosc")).unwrap(),
        fs::read(fixture("left_turn.xosc")).unwrap()
    );
    let sum = summary(&out);
    assert_eq!((sum["succeeded"].as_u64(), sum["failed"].as_u64()), (Some(1), Some(1)));
}

#[test]
fn golden_left_turn_with_clean_trace_has_no_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let run = xoscgen(&[
        "run",
        s(&fixture("left_turn.xosc")),
        "--trace",
        s(&fixture("left_turn_clean.trace.json")),
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["events"].as_array().unwrap().len(), 0);
    assert_eq!(r["outcome"], "goal_reached");
    assert_eq!(r["ego_policy"], "scripted");
}

#[test]
fn red_light_trace_reports_one_red_light_run() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let run = xoscgen(&[
        "run",
        s(&fixture("t_junction_signal.xosc")),
        "--trace",
        s(&fixture("t_junction_red_light.trace.json")),
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&run), 0);
    let r: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["counts"]["RRL"], 1);
}

#[test]
fn recorded_route_following_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = fixture("t_junction_signal.xosc");
    let (a, b, trace) = (
        tmp.path().join("a.json"),
        tmp.path().join("b.json"),
        tmp.path().join("t.json"),
    );
    assert_eq!(
        code(&xoscgen(&["run", s(&doc), "--out", s(&a), "--record", s(&trace)])),
        0
    );
    assert_eq!(
        code(&xoscgen(&["run", s(&doc), "--trace", s(&trace), "--out", s(&b)])),
        0
    );
    let ra: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    let rb: Value = serde_json::from_slice(&fs::read(&b).unwrap()).unwrap();
    assert_eq!(ra["counts"], rb["counts"]);
    assert_eq!(ra["outcome"], rb["outcome"]);
}

#[test]
fn truncated_document_is_a_read_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bytes = fs::read(fixture("left_turn.xosc")).unwrap();
    let path = tmp.path().join("cut.xosc");
    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let run = xoscgen(&["run", s(&path)]);
    assert_eq!(code(&run), 6);
    assert_eq!(stderr_json(&run)["error"], "read_error");
    let missing = xoscgen(&["run", s(&tmp.path().join("absent.xosc"))]);
    assert_eq!(code(&missing), 6);
}

#[test]
fn unknown_map_is_a_map_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("left_turn.xosc")).unwrap();
    assert!(text.contains("intersection_4way.map.json"));
    let path = tmp.path().join("moved.xosc");
    fs::write(&path, text.replace("intersection_4way.map.json", "nowhere.map.json")).unwrap();
    let run = xoscgen(&["run", s(&path)]);
    assert_eq!(code(&run), 7);
    assert_eq!(stderr_json(&run)["error"], "map_mismatch");
}

#[test]
fn validate_checks_documents_and_representations() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&xoscgen(&["validate", s(&fixture("left_turn.xosc"))])), 0);

    let run = xoscgen(&[
        "generate",
        "--text",
        LEFT_TURN,
        "--backend",
        "scripted",
        "--seed",
        "11",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&run), 0);
    let rep_path = tmp.path().join("scenario.rep.json");
    assert_eq!(code(&xoscgen(&["validate", s(&rep_path)])), 0);

    let mut rep: Value = serde_json::from_slice(&fs::read(&rep_path).unwrap()).unwrap();
    rep["transportation_facilities"]["road_marker"] = "broken_line".into();
    let bad = tmp.path().join("bad.rep.json");
    fs::write(&bad, rep.to_string()).unwrap();
    let run = xoscgen(&["validate", s(&bad)]);
    assert_eq!(code(&run), 2);
    let findings = stdout_json(&run);
    assert!(findings.as_array().unwrap().iter().any(|f| f["rule_id"] == "R1"));

    let junk = tmp.path().join("junk.rep.json");
    fs::write(&junk, "{\"climate\": ").unwrap();
    assert_eq!(code(&xoscgen(&["validate", s(&junk)])), 6);
}

#[test]
fn score_reports_accuracy_and_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let run = xoscgen(&[
        "generate",
        "--text",
        LEFT_TURN,
        "--backend",
        "scripted",
        "--seed",
        "11",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&run), 0);
    let rep = tmp.path().join("scenario.rep.json");
    let ratings = tmp.path().join("ratings.csv");
    fs::write(&ratings, "r1,r2,r3\n4,4,5\n2,3,2\n5,5,5\n1,2,1\n").unwrap();
    let run = xoscgen(&[
        "score",
        "--pred",
        s(&rep),
        "--truth",
        s(&rep),
        "--success-rate",
        "0.8731",
        "--ratings",
        s(&ratings),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let v = stdout_json(&run);
    assert_eq!(v["element_accuracy"]["mean"], 1.0);
    assert!((v["matching_accuracy"].as_f64().unwrap() - 0.8731).abs() < 1e-12);
    let (single, average) = (
        v["icc"]["single"].as_f64().unwrap(),
        v["icc"]["average"].as_f64().unwrap(),
    );
    assert!(single > 0.8 && average >= single);

    let lopsided = xoscgen(&["score", "--pred", s(&rep)]);
    assert_eq!(code(&lopsided), 5);
}

#[test]
fn corpus_check_passes_on_the_bundled_corpus() {
    let run = xoscgen(&["corpus", "check"]);
    assert_eq!(code(&run), 0);
    let v = stdout_json(&run);
    assert_eq!(v["ok"], true);
    assert!(v["maps"].as_array().unwrap().len() >= 6);
}

#[test]
fn missing_corpus_directory_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = xoscgen(&["corpus", "check", "--corpus", s(&tmp.path().join("none"))]);
    assert_eq!(code(&run), 5);
}
