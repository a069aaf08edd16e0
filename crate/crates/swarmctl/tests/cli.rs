//! End-to-end checks of the command-line surface: subcommands, exit codes,
//! output files, seeding and byte determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarmctl"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("swarmctl-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const CS_CONFIG: &str = r#"{
  "model": {"variant": "cucker_smale", "n": 4, "d": 2,
            "kernel": {"family": "rational", "h": 1.0, "beta": 1.0}},
  "control": {"law": "sparse_cs", "m": 3.0},
  "init": {"kind": "rescaled", "seed": 11, "x0": 1.0, "v0": 2.0},
  "sim": {"h": 0.001, "t_end": 3.0, "record_stride": 50}
}"#;

#[test]
fn simulate_writes_trajectory_and_summary() {
    let dir = scratch("sim");
    let cfg = dir.join("cfg.json");
    write(&cfg, CS_CONFIG);
    let out = dir.join("out");
    let status = bin()
        .args(["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());

    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    // column count: t + 2*n*d + X + V + control_norm + active_agent
    let expected_cols = 1 + 2 * 4 * 2 + 2 + 2;
    assert_eq!(header.split(',').count(), expected_cols);
    assert!(header.starts_with("t,x0_0,x0_1"));
    for line in lines {
        assert_eq!(line.split(',').count(), expected_cols);
    }
    assert!(!csv.contains('\r'), "LF endings only");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 4);
    assert!(summary["admissible"].as_bool().unwrap());
}

#[test]
fn invalid_config_exits_2_with_message() {
    let dir = scratch("bad");
    let cfg = dir.join("cfg.json");
    write(&cfg, "{\"model\": {\"variant\": \"nope\"}}");
    let output = bin()
        .args(["simulate", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!output.stderr.is_empty());

    // valid JSON, but a law that violates its own admissibility bound
    let cfg2 = dir.join("cfg2.json");
    write(
        &cfg2,
        &CS_CONFIG.replace(
            "{\"law\": \"sparse_cs\", \"m\": 3.0}",
            "{\"law\": \"total\", \"alpha\": 100.0, \"m\": 0.001}",
        ),
    );
    let output = bin()
        .args(["simulate", cfg2.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_file_exits_2() {
    let output = bin().args(["simulate", "/nonexistent.json"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn env_seed_overrides_config_seed() {
    let dir = scratch("seed");
    let cfg = dir.join("cfg.json");
    write(&cfg, CS_CONFIG);
    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    for (out, seed) in [(&a, "11"), (&b, "99"), (&c, "99")] {
        let status = bin()
            .args(["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("SWARMCTL_SEED", seed)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let ta = std::fs::read(a.join("trajectory.csv")).unwrap();
    let tb = std::fs::read(b.join("trajectory.csv")).unwrap();
    let tc = std::fs::read(c.join("trajectory.csv")).unwrap();
    assert_ne!(ta, tb, "different seeds give different runs");
    assert_eq!(tb, tc, "same seed is byte-identical");
}

#[test]
fn sweep_produces_combined_csv_and_summaries() {
    let dir = scratch("sweep");
    let cfg = dir.join("cfg.json");
    write(&cfg, CS_CONFIG);
    let out = dir.join("out");
    let status = bin()
        .args([
            "sweep",
            cfg.to_str().unwrap(),
            "--param",
            "control.m",
            "--values",
            "0.5,1.0,2.0",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "value,region_entry_time,final_functional");
    assert_eq!(lines.len(), 4);
    assert!(out.join("summary_000.json").exists());
    assert!(out.join("summary_002.json").exists());

    // empty value list: no runs, header-only csv, success
    let out2 = dir.join("out2");
    let status = bin()
        .args([
            "sweep",
            cfg.to_str().unwrap(),
            "--param",
            "control.m",
            "--values",
            "",
            "--out",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out2.join("sweep.csv")).unwrap();
    assert_eq!(csv, "value,region_entry_time,final_functional\n");
}

#[test]
fn sweep_rejects_non_numeric_parameter() {
    let dir = scratch("sweepbad");
    let cfg = dir.join("cfg.json");
    write(&cfg, CS_CONFIG);
    let output = bin()
        .args([
            "sweep",
            cfg.to_str().unwrap(),
            "--param",
            "model.variant",
            "--values",
            "1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

const REGION_CONFIG: &str = r#"{
  "model": {"variant": "cucker_smale", "n": 2, "d": 1,
            "kernel": {"family": "rational", "h": 1.0, "beta": 1.0}},
  "init": {"kind": "rescaled", "seed": 5, "x0": 0.0, "v0": 0.0},
  "sim": {"h": 0.005, "t_end": 30.0, "record_stride": 2000},
  "region": {"x0": {"min": 0.0, "max": 2.0, "count": 3},
             "v0": {"min": 0.0, "max": 1.0, "count": 3},
             "trials": 4,
             "boundaries": [{"variant": "autonomous"},
                             {"variant": "enlarged", "gamma": 0.5, "radius": 2.0}],
             "contour_levels": [0.5]}
}"#;

#[test]
fn region_writes_grid_boundaries_and_contours() {
    let dir = scratch("region");
    let cfg = dir.join("cfg.json");
    write(&cfg, REGION_CONFIG);
    let out = dir.join("out");
    let status = bin()
        .args([
            "region",
            cfg.to_str().unwrap(),
            "--jobs",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(
        lines[0],
        "x0,v0,trials,successes,probability,wilson_lo,wilson_hi"
    );
    assert_eq!(lines.len(), 1 + 9);

    assert!(out.join("boundary_autonomous.csv").exists());
    assert!(out.join("boundary_enlarged_r2.csv").exists());
    let contours = std::fs::read_to_string(out.join("contours.csv")).unwrap();
    assert!(contours.starts_with("level,polyline,vertex,x0,v0\n"));
}

#[test]
fn degenerate_single_cell_grid() {
    let dir = scratch("cell");
    let cfg = dir.join("cfg.json");
    write(
        &cfg,
        &REGION_CONFIG
            .replace("\"count\": 3", "\"count\": 1")
            .replace("\"max\": 2.0", "\"max\": 0.0")
            .replace("\"max\": 1.0", "\"max\": 0.0"),
    );
    let out = dir.join("out");
    let status = bin()
        .args(["region", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 2, "header plus a single cell row");
}

#[test]
fn region_reruns_are_byte_identical() {
    let dir = scratch("regdet");
    let cfg = dir.join("cfg.json");
    write(&cfg, REGION_CONFIG);
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        let status = bin()
            .args([
                "region",
                cfg.to_str().unwrap(),
                "--jobs",
                "3",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["grid.csv", "boundary_autonomous.csv", "contours.csv"] {
        let fa = std::fs::read(a.join(file)).unwrap();
        let fb = std::fs::read(b.join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs between reruns");
    }
}
