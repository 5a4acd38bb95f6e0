use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const REGISTRY: &str = "Trifolium\nAchillea\nGrasses\n";

const HEADER: &str = "unit_id,camera_id,date,image_path,annotated,Trifolium,Achillea,Grasses\n";

fn coverkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coverkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn weekly_manifest(dates: &[(&str, bool)]) -> String {
    let mut text = HEADER.to_string();
    for (i, &(date, annotated)) in dates.iter().enumerate() {
        if annotated {
            text.push_str(&format!("eu01,cam1,{date},img/{i}.jpg,1,{},5,25\n", 10 + i));
        } else {
            text.push_str(&format!("eu01,cam1,{date},img/{i}.jpg,0,,,\n"));
        }
    }
    text
}

#[test]
fn validate_reports_long_gap_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write(dir.path(), "registry.txt", REGISTRY);
    let manifest = write(
        dir.path(),
        "m.csv",
        &weekly_manifest(&[("2020-01-01", true), ("2020-01-08", true), ("2020-01-29", true)]),
    );
    let out = coverkit(&["validate", "--manifest", &manifest, "--registry", &registry]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out)["finding_count"].as_u64().unwrap() >= 1);

    let clean = write(dir.path(), "ok.csv", &weekly_manifest(&[("2020-01-01", true), ("2020-01-08", true)]));
    let out = coverkit(&["validate", "--manifest", &clean, "--registry", &registry]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["finding_count"], 0);
}

#[test]
fn malformed_date_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write(dir.path(), "registry.txt", REGISTRY);
    let manifest = write(dir.path(), "m.csv", &weekly_manifest(&[("2020-13-01", true), ("2020-01-08", true)]));
    let out = coverkit(&["validate", "--manifest", &manifest, "--registry", &registry]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2020-13-01"));
}

#[test]
fn interpolate_fills_the_week() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write(dir.path(), "registry.txt", REGISTRY);
    let days: Vec<String> = (17..=24).map(|d| format!("2018-05-{d}")).collect();
    let rows: Vec<(&str, bool)> = days.iter().enumerate().map(|(i, d)| (d.as_str(), i == 0 || i == 7)).collect();
    let manifest = write(dir.path(), "m.csv", &weekly_manifest(&rows));
    let dense = dir.path().join("dense.csv");
    let out = coverkit(&[
        "interpolate",
        "--manifest",
        &manifest,
        "--registry",
        &registry,
        "--out",
        dense.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["totals"]["interpolated_records"], 6);
    assert_eq!(report["totals"]["annotated_records"], 8);
    let text = std::fs::read_to_string(dense).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",interpolated,")).count(), 6);
}

#[test]
fn sample_uses_the_pixel_budget() {
    let out = coverkit(&[
        "sample",
        "--width",
        "2688",
        "--height",
        "1536",
        "--patch-size",
        "512",
        "--budget-ratio",
        "0.5",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["patch_count"], 8);
    assert_eq!(report["sampled_pixels"], 2_097_152);
    for p in report["patches"].as_array().unwrap() {
        assert!(p["x"].as_u64().unwrap() <= 2688 - 512);
        assert!(p["y"].as_u64().unwrap() <= 1536 - 512);
    }
}

#[test]
fn oversized_patch_and_missing_amount_fail_with_one() {
    let too_big = coverkit(&["sample", "--width", "2688", "--height", "1536", "--patch-size", "2688", "--count", "1"]);
    assert_eq!(too_big.status.code(), Some(1));
    let missing = coverkit(&["sample", "--width", "64", "--height", "64", "--patch-size", "8"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(coverkit(&["--help"]).status.code(), Some(0));
}

const TARGET: &str = "\
image_id,Trifolium,Achillea,Grasses
a,10,5,25
b,20,0,30
c,5,15,10
d,30,10,0
e,0,25,20
";

#[test]
fn evaluate_identity_and_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(dir.path(), "t.csv", TARGET);
    let out = coverkit(&["evaluate", "--target", &target, "--predicted", &target]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["msae"], 0.0);
    assert_eq!(report["dpc"]["correlation"], 1.0);

    let renamed = write(dir.path(), "p.csv", &TARGET.replace("\ne,", "\nz,"));
    let out = coverkit(&["evaluate", "--target", &target, "--predicted", &renamed]);
    assert_eq!(out.status.code(), Some(1));
}
