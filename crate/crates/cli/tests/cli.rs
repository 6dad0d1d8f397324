//! End-to-end checks of the `society-sim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_society-sim"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

fn baseline_doc() -> Value {
    serde_json::from_str(&std::fs::read_to_string(scenario("baseline")).unwrap()).unwrap()
}

fn write_doc(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

/// Baseline shrunk to something a debug build sweeps quickly.
fn small_doc() -> Value {
    let mut doc = baseline_doc();
    doc["consumers"]["count"] = 150.into();
    doc["epochs"] = 40.into();
    doc
}

fn exec(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["baseline", "collusion", "dominant_strategy"] {
        let out = exec(bin().arg("validate").arg(scenario(name)));
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
    }
}

#[test]
fn out_of_range_w_is_rejected_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = baseline_doc();
    doc["spectrum"]["w"] = 1.3.into();
    let out = exec(
        bin()
            .arg("validate")
            .arg(write_doc(dir.path(), "w.json", &doc)),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("spectrum.w"), "{}", stderr(&out));
}

#[test]
fn unknown_host_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = baseline_doc();
    doc["mvnos"][0]["host"] = "Z".into();
    let out = exec(
        bin()
            .arg("validate")
            .arg(write_doc(dir.path(), "h.json", &doc)),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown host"), "{}", stderr(&out));
}

#[test]
fn malformed_and_missing_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(exec(bin().arg("validate").arg(&bad)).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        exec(bin().arg("validate").arg(&missing)).status.code(),
        Some(1)
    );
}

#[test]
fn run_writes_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(
        bin()
            .arg("run")
            .arg(scenario("baseline"))
            .arg("--out")
            .arg(dir.path()),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 366);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["epochs"], 365);
    assert_eq!(summary["seed"], 42);
}

#[test]
fn zero_epochs_give_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(
        bin()
            .arg("run")
            .arg(scenario("baseline"))
            .args(["--epochs", "0", "--out"])
            .arg(dir.path()),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("epoch,"));
}

#[test]
fn runs_are_byte_identical_per_seed() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let scenario_file = write_doc(dirs[0].path(), "s.json", &small_doc());
    for (d, seed) in dirs.iter().zip(["5", "5", "6"]) {
        let out = exec(
            bin()
                .arg("run")
                .arg(&scenario_file)
                .args(["--seed", seed, "--out"])
                .arg(d.path().join("out")),
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let read =
        |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join("out").join(f)).unwrap();
    for f in ["metrics.csv", "summary.json"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f), "{f}");
    }
    assert_ne!(read(&dirs[0], "metrics.csv"), read(&dirs[2], "metrics.csv"));
}

#[test]
fn sweep_with_one_step_runs_one_point() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_doc(dir.path(), "s.json", &small_doc());
    let out = exec(
        bin()
            .arg("sweep")
            .arg(&file)
            .args(["--param", "spectrum.w", "--from", "0.3", "--to", "0.3"])
            .args(["--steps", "1", "--seeds", "2", "--out"])
            .arg(dir.path().join("sw")),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sw/sweep.json")).unwrap())
            .unwrap();
    assert_eq!(summary["values"], serde_json::json!([0.3]));
    assert_eq!(
        summary["points"]["0.3"]["runs"].as_array().unwrap().len(),
        2
    );
    assert!(dir.path().join("sw/point00_seed43.csv").exists());
}

#[test]
fn sweep_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_doc(dir.path(), "s.json", &small_doc());
    let out = exec(
        bin()
            .arg("sweep")
            .arg(&file)
            .args(["--param", "spectrum.nope", "--from", "0.1", "--to", "0.2"])
            .args(["--steps", "2", "--out"])
            .arg(dir.path().join("sw")),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("spectrum.nope"));
}

#[test]
fn sweep_output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_doc(dir.path(), "s.json", &small_doc());
    for jobs in ["1", "3"] {
        let out = exec(
            bin()
                .arg("sweep")
                .arg(&file)
                .args(["--param", "spectrum.w", "--from", "0.1", "--to", "0.4"])
                .args(["--steps", "3", "--seeds", "2", "--jobs", jobs, "--out"])
                .arg(dir.path().join(format!("j{jobs}"))),
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let names: Vec<String> = std::fs::read_dir(dir.path().join("j1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 7);
    for name in names {
        let a = std::fs::read(dir.path().join("j1").join(&name)).unwrap();
        let b = std::fs::read(dir.path().join("j3").join(&name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

/// Every key a scenario can serialize must be described by the shipped schema.
fn covered(schema: &Value, root: &Value, doc: &Value, path: &str) -> Result<(), String> {
    if let Some(target) = schema.get("$ref").and_then(Value::as_str) {
        let name = target.trim_start_matches("#/$defs/");
        return covered(&root["$defs"][name], root, doc, path);
    }
    if let Some(variants) = schema.get("oneOf").and_then(Value::as_array) {
        return variants
            .iter()
            .find(|v| covered(v, root, doc, path).is_ok())
            .map(|_| ())
            .ok_or_else(|| format!("{path}: no schema variant matches {doc}"));
    }
    match doc {
        Value::Object(map) => {
            let props = schema
                .get("properties")
                .and_then(Value::as_object)
                .ok_or_else(|| format!("{path}: schema has no properties"))?;
            if let Some(kind) = map.get("kind") {
                if props.get("kind").and_then(|k| k.get("const")) != Some(kind) {
                    return Err(format!("{path}: kind {kind} not in this variant"));
                }
            }
            for (key, value) in map {
                let sub = props
                    .get(key)
                    .ok_or_else(|| format!("{path}.{key} is not in the schema"))?;
                covered(sub, root, value, &format!("{path}.{key}"))?;
            }
            Ok(())
        }
        Value::Array(items) => items.iter().enumerate().try_for_each(|(i, item)| {
            covered(&schema["items"], root, item, &format!("{path}.{i}"))
        }),
        _ => Ok(()),
    }
}

#[test]
fn schema_describes_every_serialized_field() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenario.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    for name in ["baseline", "collusion", "dominant_strategy"] {
        let config = society_core::market::ScenarioConfig::from_path(scenario(name)).unwrap();
        let doc = config.to_json_value();
        if let Err(e) = covered(&schema, &schema, &doc, name) {
            panic!("{e}");
        }
    }
}
