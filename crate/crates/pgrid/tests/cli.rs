//! End-to-end runs of the `pgrid` binary over temp directories.

use std::path::Path;
use std::process::Command;

fn pgrid(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pgrid"))
        .args(args)
        .output()
        .expect("spawn pgrid")
}

fn ok(args: &[&str]) {
    let out = pgrid(args);
    assert!(
        out.status.success(),
        "pgrid {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small but non-trivial scene bundles for training flows.
fn write_scene_config(path: &Path, seed: u64) {
    let text = format!(
        r#"{{
  "extent_m": [90.0, 90.0],
  "resolution_m": 0.45,
  "line_visibility": 1.0,
  "fences_per_km2": 30.0,
  "trees_per_km2": 60.0,
  "lone_poles_per_km2": 30.0,
  "seed": {seed}
}}"#
    );
    std::fs::write(path, text).unwrap();
}

#[test]
fn full_training_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("scene.json");
    write_scene_config(&cfg, 0);

    // a handful of training scenes
    let scenes = root.join("scenes");
    for i in 0..4 {
        ok(&[
            "synth",
            "--config",
            path_str(&cfg),
            "--seed",
            &format!("{}", 100 + i),
            "--out",
            path_str(&scenes.join(format!("scene_{i}"))),
        ]);
    }

    let train_cfg = root.join("train.json");
    std::fs::write(
        &train_cfg,
        r#"{"lr": 0.01, "epochs": 30, "momentum": 0.9, "seed": 5, "augment": true, "lambda_hard_neg": 1.0}"#,
    )
    .unwrap();

    // poles: train, detect, unify from the resulting probability raster
    let pole_w = root.join("pole_weights.json");
    ok(&[
        "train-poles",
        "--scenes",
        path_str(&scenes),
        "--config",
        path_str(&train_cfg),
        "--out",
        path_str(&pole_w),
        "--curve",
        path_str(&root.join("pole_curve.json")),
    ]);
    assert!(pole_w.exists());
    let curve: Vec<f64> =
        serde_json::from_str(&std::fs::read_to_string(root.join("pole_curve.json")).unwrap())
            .unwrap();
    assert_eq!(curve.len(), 30);
    assert!(curve.last().unwrap() < curve.first().unwrap());

    let image = scenes.join("scene_0/image.pgr");
    let probs = root.join("pole_probs.pgr");
    ok(&[
        "detect-poles",
        "--image",
        path_str(&image),
        "--weights",
        path_str(&pole_w),
        "--out",
        path_str(&probs),
    ]);

    // lines: train + segment
    let line_w = root.join("line_weights.json");
    ok(&[
        "train-lines",
        "--scenes",
        path_str(&scenes),
        "--config",
        path_str(&train_cfg),
        "--sf",
        "4",
        "--out",
        path_str(&line_w),
    ]);
    let line_probs = root.join("line_probs.pgr");
    ok(&[
        "segment-lines",
        "--image",
        path_str(&image),
        "--weights",
        path_str(&line_w),
        "--sf",
        "4",
        "--out",
        path_str(&line_probs),
    ]);

    // unify the trained predictions and evaluate against scene ground truth
    let grid = root.join("grid");
    ok(&[
        "unify",
        "--pole-probs",
        path_str(&probs),
        "--line-probs",
        path_str(&line_probs),
        "--buffer",
        "2.0",
        "--min-area",
        "2",
        "--out",
        path_str(&grid),
    ]);
    for suffix in [".poles.geojson", ".lines.geojson", ".corridors.geojson"] {
        assert!(root.join(format!("grid{suffix}")).exists());
    }

    let report = root.join("report.json");
    ok(&[
        "eval-poles",
        "--gt",
        path_str(&scenes.join("scene_0/poles.geojson")),
        "--pred",
        path_str(&root.join("grid.poles.geojson")),
        "--th",
        "5,7,10",
        "--match",
        "both",
        "--region",
        "scene_0",
        "--out",
        path_str(&report),
        "--csv",
        path_str(&root.join("report.csv")),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["thresholds"].as_array().unwrap().len(), 3);
    for row in parsed["thresholds"].as_array().unwrap() {
        for key in ["P_S", "P_A", "R", "F1_S", "F1_A"] {
            assert!(row.get(key).is_some(), "missing {key}");
        }
    }
    let csv = std::fs::read_to_string(root.join("report.csv")).unwrap();
    assert!(csv.starts_with("region,th,P_S,P_A,R,F1_S,F1_A"));
    assert_eq!(csv.lines().count(), 4);

    // gradcheck on a training scene must pass at 1e-4
    let gc = pgrid(&[
        "gradcheck",
        "--weights",
        path_str(&pole_w),
        "--scene",
        path_str(&scenes.join("scene_1")),
        "--h",
        "1e-4",
    ]);
    assert!(
        gc.status.success(),
        "gradcheck failed: {}",
        String::from_utf8_lossy(&gc.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&gc.stdout).expect("gradcheck prints JSON");
    assert!(report["max_rel_error"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn oracle_unify_snap_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("scene.json");
    std::fs::write(
        &cfg,
        r#"{"extent_m":[150.0,150.0],"resolution_m":0.15,"line_visibility":1.0,
           "fences_per_km2":0.0,"trees_per_km2":0.0,"lone_poles_per_km2":0.0}"#,
    )
    .unwrap();
    let scene = root.join("scene");
    ok(&[
        "synth",
        "--config",
        path_str(&cfg),
        "--seed",
        "7",
        "--out",
        path_str(&scene),
        "--oracle",
    ]);
    let grid = root.join("grid");
    ok(&[
        "unify",
        "--pole-probs",
        path_str(&scene.join("pole_probs.pgr")),
        "--line-probs",
        path_str(&scene.join("line_probs.pgr")),
        "--buffer",
        "2.0",
        "--out",
        path_str(&grid),
    ]);
    let edges = root.join("edges.json");
    ok(&[
        "snap-graph",
        "--layout",
        path_str(&grid),
        "--tol",
        "3.0",
        "--out",
        path_str(&edges),
    ]);
    let recovered: Vec<(u64, u64)> =
        serde_json::from_str(&std::fs::read_to_string(&edges).unwrap()).unwrap();
    let expected: Vec<(u64, u64)> =
        serde_json::from_str(&std::fs::read_to_string(scene.join("edges.json")).unwrap()).unwrap();
    assert_eq!(recovered.len(), expected.len());

    let cov = root.join("coverage.json");
    ok(&[
        "coverage",
        "--ours",
        path_str(&grid),
        "--external-poles",
        path_str(&scene.join("poles.geojson")),
        "--cell-size",
        "50",
        "--out",
        path_str(&cov),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cov).unwrap()).unwrap();
    let n_ours = parsed["n_ours"].as_u64().unwrap();
    let n_both = parsed["n_both"].as_u64().unwrap();
    let n_new = parsed["n_newly_mapped"].as_u64().unwrap();
    assert_eq!(n_both + n_new, n_ours);

    // evaluating the corridor layout against ground-truth lines
    let lr = root.join("lines_report.json");
    ok(&[
        "eval-lines",
        "--pred-layout",
        path_str(&grid),
        "--like",
        path_str(&scene.join("image.pgr")),
        "--gt",
        path_str(&scene.join("lines.geojson")),
        "--buffer",
        "2.0",
        "--out",
        path_str(&lr),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&lr).unwrap()).unwrap();
    assert!(parsed["lines"]["f1"].as_f64().unwrap() > 0.95);
}

#[test]
fn missing_input_exits_nonzero_with_message() {
    let out = pgrid(&[
        "detect-poles",
        "--image",
        "/nonexistent/image.pgr",
        "--weights",
        "/nonexistent/w.json",
        "--out",
        "/tmp/x.pgr",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"resolution_m": -1.0}"#).unwrap();
    let out = pgrid(&[
        "synth",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&dir.path().join("scene")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution"));
}

#[test]
fn mismatched_dmap_pairs_rejected() {
    let out = pgrid(&["dmap", "--gt", "a.geojson", "--pred", "b.geojson", "--pred", "c.geojson", "--th", "10", "--out", "/tmp/d.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pair"));
}

/// Help text documents the headline defaults.
#[test]
fn help_documents_defaults() {
    let top = pgrid(&["--help"]);
    let text = String::from_utf8_lossy(&top.stdout).to_string();
    assert!(text.contains("scaling factor 4"));
    assert!(text.contains("2 m"));
    assert!(text.contains("5,7,10"));
    assert!(text.contains("250 m"));

    let eval = pgrid(&["eval-poles", "--help"]);
    let text = String::from_utf8_lossy(&eval.stdout).to_string();
    assert!(text.contains("default: 5"), "{text}");
    let lines = pgrid(&["train-lines", "--help"]);
    let text = String::from_utf8_lossy(&lines.stdout).to_string();
    assert!(text.contains("default: 4"), "{text}");
    let unify = pgrid(&["unify", "--help"]);
    let text = String::from_utf8_lossy(&unify.stdout).to_string();
    assert!(text.contains("default: 2"), "{text}");
}
