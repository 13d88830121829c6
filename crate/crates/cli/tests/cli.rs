use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rstlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rstlab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("RSTLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&fs::read(dir.join(format!("{name}_manifest.json"))).unwrap()).unwrap()
}

/// Every file in `dir` except the timing records, by name.
fn deterministic_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .filter(|(n, _)| !n.ends_with("_timing.json"))
        .collect();
    files.sort();
    files
}

#[test]
fn explore_trace_has_strictly_decreasing_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = rstlab(dir.path(), &["explore", "--dim", "2", "--start-norm", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("explore_trace.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "R").unwrap();
    let radii: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert!(radii.len() > 10);
    assert!(radii.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(*radii.last().unwrap(), 0.0);
    let m = manifest(dir.path(), "explore");
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["constants"]["kappa"], 2.0);
    assert_eq!(m["passed"], true);
}

#[test]
fn lemma_fuzz_exits_zero_without_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = rstlab(dir.path(), &["check", "lemmas", "--instances", "100000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("lemmas_fuzz.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2], "100000");
        assert_eq!((cols[5], cols[6]), ("0", "0"), "{row}");
    }
}

#[test]
fn deviation_outputs_are_byte_identical_across_runs_and_workers() {
    let args = [
        "experiment", "deviation", "--dim", "2", "--norms", "50,100,200", "--epsilon", "0.25", "--trials",
        "500", "--seed", "3",
    ];
    let runs: Vec<Vec<(String, Vec<u8>)>> = ["1", "1", "3"]
        .iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            let mut a = args.to_vec();
            a.extend(["--workers", w]);
            let out = rstlab(dir.path(), &a);
            assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
            deterministic_files(dir.path())
        })
        .collect();
    assert_eq!(runs[0].len(), 3);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn sample_export_import_build_round_trip() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sample = ["--dim", "2", "--radius", "25", "--seed", "11"];
    assert_eq!(rstlab(a.path(), &[&["sample"][..], &sample].concat()).status.code(), Some(0));
    let points = a.path().join("sample_points.csv");
    let imported = rstlab(a.path(), &["build", "--points", points.to_str().unwrap()]);
    assert_eq!(imported.status.code(), Some(0));
    assert_eq!(rstlab(b.path(), &[&["build"][..], &sample].concat()).status.code(), Some(0));
    let ta = fs::read(a.path().join("build_tree.csv")).unwrap();
    let tb = fs::read(b.path().join("build_tree.csv")).unwrap();
    assert!(ta.len() > 100);
    assert_eq!(ta, tb);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("from-file");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("radius = 8\nseed = 5\nout-dir = {:?}\n", out_dir.to_str().unwrap())).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_rstlab"))
        .args(["--config", cfg.to_str().unwrap(), "sample", "--seed", "6"])
        .env_remove("RSTLAB_OUT_DIR")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let m = manifest(&out_dir, "sample");
    assert_eq!(m["config"]["seed"], 6);
    assert_eq!(m["config"]["radius"], 8.0);
    assert_eq!(m["config"]["dim"], 2);
}

#[test]
fn environment_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_rstlab"))
        .args(["sample", "--radius", "5"])
        .env("RSTLAB_OUT_DIR", dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("sample_points.csv").exists());
}

#[test]
fn exit_status_contract() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rstlab(dir.path(), &["sample", "--dim", "1"]).status.code(), Some(2));
    assert_eq!(rstlab(dir.path(), &["explore", "--kappa", "0.5"]).status.code(), Some(2));
    assert_eq!(rstlab(dir.path(), &["sample", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(rstlab(dir.path(), &["check", "planarity", "--dim", "3"]).status.code(), Some(2));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(rstlab(&blocker.join("sub"), &["sample"]).status.code(), Some(2));

    let out = rstlab(dir.path(), &["experiment", "spacing", "--start-norm", "60", "--trials", "100"]);
    let passed = manifest(dir.path(), "spacing")["passed"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if passed { 0 } else { 1 }));
}

#[test]
fn checks_on_sampled_trees_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rstlab(dir.path(), &["check", "planarity", "--radius", "20"]).status.code(), Some(0));
    assert_eq!(rstlab(dir.path(), &["check", "tree", "--dim", "3", "--radius", "6"]).status.code(), Some(0));
    assert_eq!(manifest(dir.path(), "planarity")["counts"]["crossings"], 0);
    let csv = fs::read_to_string(dir.path().join("planarity_crossings.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}
