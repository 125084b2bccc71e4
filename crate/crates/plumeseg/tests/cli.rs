use std::path::Path;
use std::process::{Command, Output};

use plumeseg::grd::read_scene;
use serde_json::{json, Value};

fn base_config() -> Value {
    json!({
        "seed": 3,
        "out": "run",
        "synth": {"count": 12, "width": 64, "height": 64, "plume_sigma": [5.0, 10.0], "stations": {"count": 6}},
        "crops": {"size": 32, "n_max": 6},
        "unet": {"depth": 2, "base_filters": 4},
        "train": {"lr0": 0.005, "epochs": 2, "step_epochs": 2, "batch": 8},
        "predict": {"tile": 64}
    })
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn write_config(dir: &Path, patch: Value) {
    let mut cfg = base_config();
    merge(&mut cfg, patch);
    std::fs::write(dir.join("cfg.json"), serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

fn plumeseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plumeseg"))
        .args(args)
        .current_dir(dir)
        .env("PLUMESEG_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, cmd: &str, extra: &[&str]) -> Value {
    let mut args = vec![cmd, "--config", "cfg.json"];
    args.extend(extra);
    let out = plumeseg(dir, &args);
    assert!(out.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn history_epochs(path: &Path) -> Vec<u64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect()
}

#[test]
fn unknown_config_key_is_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), json!({"train": {"learning_rate": 0.1}}));
    let out = plumeseg(dir.path(), &["synth", "--config", "cfg.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn invalid_band_mode_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), json!({}));
    let out = plumeseg(dir.path(), &["synth", "--config", "cfg.json", "--band-mode", "2band"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("run").exists());
}

#[test]
fn synth_with_zero_scenes_writes_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), json!({"synth": {"count": 0}}));
    let summary = ok(dir.path(), "synth", &[]);
    assert_eq!(summary["scenes"], 0);
    assert_eq!(summary["positive_fraction"], 0.0);
    assert_eq!(std::fs::read_dir(dir.path().join("run/synth/scenes")).unwrap().count(), 0);
    assert!(dir.path().join("run/synth/manifest.json").exists());
    let prepare = plumeseg(dir.path(), &["prepare", "--config", "cfg.json"]);
    assert!(!prepare.status.success());
}

#[test]
fn seed_override_is_recorded_and_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), json!({"synth": {"count": 2}}));
    ok(dir.path(), "synth", &[]);
    let a = std::fs::read(dir.path().join("run/synth/scenes/scene_0000.grd")).unwrap();
    ok(dir.path(), "synth", &["--seed", "99"]);
    let b = std::fs::read(dir.path().join("run/synth/scenes/scene_0000.grd")).unwrap();
    assert_ne!(a, b);
    assert_eq!(std::fs::read_dir(dir.path().join("run/synth/scenes")).unwrap().count(), 2);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/synth/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 99);
    assert_eq!(manifest["command"], "synth");
}

#[test]
fn resumed_training_continues_at_next_epoch() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), json!({}));
    ok(dir.path(), "synth", &[]);
    ok(dir.path(), "prepare", &[]);
    ok(dir.path(), "train", &[]);
    let history = dir.path().join("run/train/history.csv");
    assert_eq!(history_epochs(&history), vec![0, 1]);
    assert!(dir.path().join("run/train/ckpt_epoch1.bin").exists());

    write_config(dir.path(), json!({"train": {"epochs": 3, "resume": true}}));
    let summary = ok(dir.path(), "train", &[]);
    assert_eq!(summary["start_epoch"], 2);
    assert_eq!(summary["epochs_run"], 1);
    assert_eq!(history_epochs(&history), vec![0, 1, 2]);
    assert!(dir.path().join("run/train/ckpt_epoch2.bin").exists());
    for chart in ["loss.svg", "dice.svg"] {
        let svg = std::fs::read_to_string(dir.path().join("run/train").join(chart)).unwrap();
        assert_eq!(svg.matches("class=\"series\"").count(), 2);
    }

    let straight = tempfile::tempdir().unwrap();
    write_config(straight.path(), json!({"train": {"epochs": 3}}));
    ok(straight.path(), "synth", &[]);
    ok(straight.path(), "prepare", &[]);
    ok(straight.path(), "train", &[]);
    let read = |d: &Path, f: &str| std::fs::read(d.join("run/train").join(f)).unwrap();
    assert_eq!(read(dir.path(), "history.csv"), read(straight.path(), "history.csv"));
    assert_eq!(read(dir.path(), "ckpt_epoch2.bin"), read(straight.path(), "ckpt_epoch2.bin"));
}

#[test]
fn predict_and_validate_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    write_config(dir.path(), json!({"train": {"epochs": 1}}));
    ok(dir.path(), "synth", &[]);
    ok(dir.path(), "prepare", &[]);
    ok(dir.path(), "train", &[]);

    write_config(dir.path(), json!({"train": {"epochs": 1}, "predict": {"scenes": "empty"}}));
    let summary = ok(dir.path(), "predict", &[]);
    assert_eq!(summary["scenes"], 0);
    assert_eq!(summary["positive_pixels"], 0);
    assert!(!dir.path().join("run/predict/masks").exists());

    write_config(dir.path(), json!({"train": {"epochs": 1}}));
    let summary = ok(dir.path(), "predict", &[]);
    assert_eq!(summary["scenes"], 12);
    let scene = read_scene(&dir.path().join("run/synth/scenes/scene_0003.grd")).unwrap();
    let mask = read_scene(&dir.path().join("run/predict/masks/scene_0003.grd")).unwrap();
    assert_eq!((mask.width(), mask.height()), (scene.width(), scene.height()));
    assert_eq!(mask.transform, scene.transform);

    let bad = plumeseg(dir.path(), &["predict", "--config", "cfg.json", "--band-mode", "3band"]);
    assert!(!bad.status.success());

    write_config(
        dir.path(),
        json!({
            "train": {"epochs": 1},
            "validate": {"sources": [
                {"name": "first", "kind": "annotations", "path": "run/synth/annotations.geojson"},
                {"name": "second", "kind": "annotations", "path": "run/synth/annotations.geojson"},
                {"name": "missing", "kind": "masks", "path": "nowhere"}
            ]}
        }),
    );
    let out = plumeseg(dir.path(), &["validate", "--config", "cfg.json"]);
    assert!(!out.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("run/validate/comparison.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (r2, err) = (col("within_adj_r2"), col("error"));
    assert_eq!(rows[0][r2], rows[1][r2]);
    assert!(rows[0][r2].parse::<f64>().unwrap().is_finite());
    assert!(rows[2][r2].is_empty());
    assert!(!rows[2][err].is_empty());
}
