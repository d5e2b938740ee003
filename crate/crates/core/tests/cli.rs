mod common;

use std::process::Command;

use cbtracker::cli::{run, EXIT_FINDINGS, EXIT_IO, EXIT_OK};
use common::{fixture, read_fixture};

fn cbtracker(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("cbtracker").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn validate_fixture_radar() {
    let (code, out, err) = cbtracker(&["validate", &path("streamer.bmr.json")]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(out.is_empty());
}

#[test]
fn validate_whole_project() {
    let (code, out, err) = cbtracker(&[
        "validate",
        &path("streamer.bmr.json"),
        &path("streamer.hints.json"),
        &path("streamer.annotations.json"),
    ]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let (code, ..) = cbtracker(&["validate", &path("streamer.annotated.bpmn")]);
    assert_eq!(code, EXIT_OK);
}

#[test]
fn validate_missing_file() {
    let (code, _, err) = cbtracker(&["validate", "/no/such/radar.json"]);
    assert_eq!(code, EXIT_IO);
    assert!(err.contains("/no/such/radar.json"), "{err}");
}

#[test]
fn validate_two_focal_actors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("two-focal.json");
    let text =
        read_fixture("streamer.bmr.json").replacen(r#""role": "partner""#, r#""role": "focal""#, 1);
    std::fs::write(&bad, text).unwrap();
    let (code, out, _) = cbtracker(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(out.contains("multiple-focal-actors"), "{out}");
    assert!(out.contains("/actors/2/role"), "{out}");
}

#[test]
fn validate_cyclic_model() {
    let (code, out, _) = cbtracker(&["validate", &path("cyclic.bpmn")]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(out.contains("cycle"), "{out}");
}

#[test]
fn transform_matches_golden_file() {
    let (code, out, err) = cbtracker(&[
        "transform",
        "--radar",
        &path("streamer.bmr.json"),
        "--hints",
        &path("streamer.hints.json"),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out, read_fixture("streamer.bpmn"));
}

#[test]
fn transform_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.bpmn");
    let args = [
        "transform",
        "--radar",
        &path("streamer.bmr.json"),
        "--hints",
        &path("streamer.hints.json"),
        "--out",
        target.to_str().unwrap(),
    ];
    assert_eq!(cbtracker(&args).0, EXIT_OK);
    let first = std::fs::read(&target).unwrap();
    assert_eq!(cbtracker(&args).0, EXIT_OK);
    assert_eq!(std::fs::read(&target).unwrap(), first);
    assert_eq!(first, read_fixture("streamer.bpmn").into_bytes());
}

#[test]
fn transform_without_hints_uses_default_order() {
    let (code, out, _) = cbtracker(&["transform", "--radar", &path("streamer.bmr.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(!out.contains("messageFlow"));
    let rights = out.find(r#"name="acquire streaming rights""#).unwrap();
    let produce = out.find(r#"name="produce advertising""#).unwrap();
    assert!(rights < produce);
}

#[test]
fn transform_with_unknown_hint_task() {
    let dir = tempfile::tempdir().unwrap();
    let hints = dir.path().join("bad.hints.json");
    std::fs::write(
        &hints,
        read_fixture("streamer.hints.json").replace(
            r#""targetTask": "play song""#,
            r#""targetTask": "skip song""#,
        ),
    )
    .unwrap();
    let (code, out, err) = cbtracker(&[
        "transform",
        "--radar",
        &path("streamer.bmr.json"),
        "--hints",
        hints.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(out.is_empty());
    assert!(err.contains("skip song"), "{err}");
}

#[test]
fn annotate_reproduces_annotated_golden() {
    let (code, out, err) = cbtracker(&[
        "annotate",
        "--bpmn",
        &path("streamer.bpmn"),
        "--annotations",
        &path("streamer.annotations.json"),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out, read_fixture("streamer.annotated.bpmn"));

    // straight from the radar gives the same document
    let (_, direct, _) = cbtracker(&[
        "annotate",
        "--radar",
        &path("streamer.bmr.json"),
        "--hints",
        &path("streamer.hints.json"),
        "--annotations",
        &path("streamer.annotations.json"),
    ]);
    assert_eq!(direct, out);
}

#[test]
fn annotate_wrong_actor() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("x.annotations.json");
    std::fs::write(
        &ann,
        r#"[{"taskDisplayId": "1.5", "actor": "Advertiser", "type": "cost", "kpi": "k", "current": "1"}]"#,
    )
    .unwrap();
    let (code, _, err) = cbtracker(&[
        "annotate",
        "--bpmn",
        &path("streamer.bpmn"),
        "--annotations",
        ann.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(err.contains("Advertiser"), "{err}");
}

#[test]
fn eval_json_contains_streamer_net() {
    let (code, out, err) = cbtracker(&[
        "eval",
        "--bpmn",
        &path("streamer.annotated.bpmn"),
        "--format",
        "json",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains(r#""currentNet": "4726.50""#), "{out}");
}

#[test]
fn eval_single_actor_table() {
    let (code, out, _) = cbtracker(&[
        "eval",
        "--bpmn",
        &path("streamer.annotated.bpmn"),
        "--actor",
        "Streamer",
        "--format",
        "text-table",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.matches("Actor: ").count(), 1);
    assert!(out.contains("Actor: Streamer (focal)"));
    assert!(out.contains("4726.50"));

    let (code, _, err) = cbtracker(&[
        "eval",
        "--bpmn",
        &path("streamer.annotated.bpmn"),
        "--actor",
        "Nobody",
    ]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(err.contains("Nobody"));
}

#[test]
fn eval_cyclic_lists_members() {
    let (code, _, err) = cbtracker(&["eval", "--bpmn", &path("cyclic.bpmn")]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(err.contains("cycle member (1.1,Revenue)"), "{err}");
    assert!(err.contains("cycle member (1.2,Cost)"), "{err}");
}

#[test]
fn eval_from_radar_and_annotations() {
    let (code, out, _) = cbtracker(&[
        "eval",
        "--radar",
        &path("streamer.bmr.json"),
        "--hints",
        &path("streamer.hints.json"),
        "--annotations",
        &path("streamer.annotations.json"),
        "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains(",receive advertising income,benefit,Profitability,Receive advertising income,6171.00,20000.00"));
}

#[test]
fn malformed_bpmn_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bpmn");
    std::fs::write(
        &bad,
        read_fixture("streamer.bpmn").replace("</bpmn:collaboration>", "</bpmn:collab>"),
    )
    .unwrap();
    let (code, _, err) = cbtracker(&["eval", "--bpmn", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(err.contains("line 15"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cbtracker");
    let ok = Command::new(bin)
        .args(["validate", &path("streamer.bmr.json")])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let missing = Command::new(bin)
        .args(["validate", "/no/such.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_IO));
    let cyclic = Command::new(bin)
        .args(["eval", "--bpmn", &path("cyclic.bpmn")])
        .env("CBTRACKER_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(cyclic.status.code(), Some(EXIT_FINDINGS));
}
