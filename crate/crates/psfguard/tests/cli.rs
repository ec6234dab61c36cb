use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psfguard::io::{read_field, read_occupancy, read_samples_csv};
use psfguard::telemetry::read_records;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn psfguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psfguard"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run(scenario: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    psfguard(&args)
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn filtered_run_is_clean_and_writes_one_record_per_tick() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(fixture("reach.json").to_str().unwrap(), dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (records, corrupt) =
        read_records(std::fs::File::open(dir.path().join("telemetry.jsonl")).unwrap()).unwrap();
    // 2 s at 50 Hz
    assert_eq!(records.len(), 100);
    assert_eq!(corrupt, 0);
    assert!(records.iter().all(|r| r.min_h_samples > 0.0));
    let s = summary(dir.path());
    assert_eq!(s["violations"], 0);
    assert_eq!(s["ticks"], 100);
    // stdout carries the same summary
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["scenario"], "reach");
    let samples =
        read_samples_csv(std::fs::File::open(dir.path().join("samples.csv")).unwrap()).unwrap();
    assert_eq!(samples.len(), records[0].n_samples);
}

#[test]
fn unfiltered_baseline_exits_with_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        fixture("reach.json").to_str().unwrap(),
        dir.path(),
        &["--unfiltered"],
    );
    assert_eq!(out.status.code(), Some(1));
    let s = summary(dir.path());
    assert!(s["clearance_violations"].as_u64().unwrap() > 0);
    assert_eq!(s["filtered"], false);
}

#[test]
fn wrong_units_are_rejected_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(fixture("bad_units.json").to_str().unwrap(), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("units.length"), "{err}");
    assert!(err.contains("line 4"), "{err}");
    assert!(!dir.path().join("telemetry.jsonl").exists());
}

#[test]
fn unknown_keys_are_rejected_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        fixture("unknown_key.json").to_str().unwrap(),
        dir.path(),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sed") && err.contains("line 22"), "{err}");
}

#[test]
fn missing_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("/nonexistent/scenario.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn null_clock_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = fixture("reach.json");
    for dir in [&a, &b] {
        let out = run(
            scenario.to_str().unwrap(),
            dir.path(),
            &["--null-clock", "--ticks", "40"],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("telemetry.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn seed_and_tick_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        fixture("reach.json").to_str().unwrap(),
        dir.path(),
        &["--ticks", "7", "--seed", "99"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(dir.path())["ticks"], 7);
}

#[test]
fn field_dumps_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        fixture("reach.json").to_str().unwrap(),
        dir.path(),
        &["--ticks", "12", "--dump-fields", "5"],
    );
    assert_eq!(out.status.code(), Some(0));
    for tick in [0, 5, 10] {
        let field = read_field(
            &mut std::fs::File::open(dir.path().join(format!("field_{tick:06}.bin"))).unwrap(),
        )
        .unwrap();
        let grid = read_occupancy(
            &mut std::fs::File::open(dir.path().join(format!("occupancy_{tick:06}.bin"))).unwrap(),
        )
        .unwrap();
        assert_eq!(field.geometry, grid.geometry);
        assert_eq!(field.geometry.dims.as_array(), [32, 32, 32]);
        // Dirichlet nodes are the occupied voxels
        assert_eq!(field.occupied, grid.occupied);
        assert!(field.values.iter().all(|v| *v >= 0.0));
    }
    assert!(!dir.path().join("field_000001.bin").exists());
}

#[test]
fn concurrent_mode_runs_to_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        fixture("reach.json").to_str().unwrap(),
        dir.path(),
        &["--concurrent", "--ticks", "50"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path());
    assert_eq!(s["ticks"], 50);
    assert_eq!(s["violations"], 0);
}

#[test]
fn summarize_skips_corrupt_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        fixture("reach.json").to_str().unwrap(),
        dir.path(),
        &["--ticks", "20"],
    );
    assert_eq!(out.status.code(), Some(0));
    let telemetry = dir.path().join("telemetry.jsonl");
    let mut text = std::fs::read_to_string(&telemetry).unwrap();
    text.push_str("{\"t\": 0.5, \"truncated\n");
    std::fs::write(&telemetry, text).unwrap();
    let report = dir.path().join("report.json");
    let out = psfguard(&[
        "summarize",
        telemetry.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 corrupt line"));
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(s["records"], 20);
    assert_eq!(s["corrupt_lines"], 1);
    assert_eq!(s["n_samples"], 37);
    assert!(s["columns"]["min_h_samples"]["p99"].is_number());
}

#[test]
fn catalog_exports_loadable_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = psfguard(&["catalog", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 20);
    let s = psfguard::scenario_file::load_scenario(&dir.path().join("crossing_03.json")).unwrap();
    assert_eq!(s, psfguard::catalog::moving_sphere(3));
}
