use std::fs;
use std::process::{Command, Output};

const PSI: &str = "kernel ring=zmod:2 rank=1 dims=1,1 H=(-1,0):1;(0,0):1;(1,0):1;(0,1):1";

fn modshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modshift")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn invalid_ring_is_a_usage_error() {
    let out = modshift(&["shift", "kernel", "--kernel", "kernel ring=zmod:7x rank=1 H=(0):1", "--extents", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ring descriptor"));
}

#[test]
fn kernel_count_on_six_sites() {
    let out = modshift(&["shift", "kernel", "--kernel", PSI, "--extents", "3,2"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["solution_count"], "32");
}

#[test]
fn step_subtracts_neighbour() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.cfg");
    fs::write(&input, "MODSHIFT-CFG v1\nzmod:6\nrank 1\ndims 1 0\norigin 0\nextents 4\nmode torus\n0 1 3 2\n").unwrap();
    let out = modshift(&["lca", "step", "--rule", "rule ring=zmod:6 rank=1 H=(0):1;(1):5", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // x_m - x_{m+1} mod 6 on the torus.
    assert_eq!(text.lines().last().unwrap(), "5 4 1 2");
}

#[test]
fn crt_split_writes_components() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.cfg");
    fs::write(&input, "MODSHIFT-CFG v1\nzmod:6\nrank 1\ndims 1 0\norigin 0\nextents 3\nmode torus\n5 4 3\n").unwrap();
    let prefix = dir.path().join("part");
    let out = modshift(&["crt", "split", "--input", input.to_str().unwrap(), "--prefix", prefix.to_str().unwrap()]);
    assert!(out.status.success());
    let two = fs::read_to_string(dir.path().join("part.0.cfg")).unwrap();
    let three = fs::read_to_string(dir.path().join("part.1.cfg")).unwrap();
    assert_eq!(two.lines().last().unwrap(), "1 0 1");
    assert_eq!(three.lines().last().unwrap(), "2 1 0");
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("e.toml");
    fs::write(
        &cfg,
        r#"
[experiment]
name = "small"
seed = 4

[[check]]
name = "sweep"
kind = "haar-sweep"
char_extents = [2]
expect = "delta"
measure = { kind = "uniform", ring = "zmod:3", extents = [3] }

[[check]]
name = "wrong"
kind = "f-phi"
rule = "rule ring=zmod:2 rank=1 H=(0):1;(1):1"
expect = [0]
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = modshift(&["experiment", "run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "a failed check gives exit code 1");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["failures"][0]["check"], "wrong");
    assert!(out_dir.join("run_meta.json").exists());
    assert!(out_dir.join("config.toml").exists());
}

#[test]
fn unknown_bundled_suite_is_an_error() {
    let out = modshift(&["experiment", "run", "bundled:nope"]);
    assert_eq!(out.status.code(), Some(2));
}
