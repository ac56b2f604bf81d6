use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn segame(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_segame"));
    cmd.args(args).env_remove("SEGAME_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn case_study() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/examples/case_study.scenario.json")
}

const SMALL: &str = r#"{
  "map": { "width": 60, "height": 40 },
  "buildings": [ { "vertices": [[25, 15], [35, 15], [35, 25], [25, 25]] } ],
  "sensors": [ { "kind": "omnidirectional", "building": 0, "range": 8 } ],
  "attacker": { "start": [5, 20], "goal": [55, 20], "v_max": 2.5, "horizon_s": 40, "n_steps": 16, "rrt_iterations": 300 }
}"#;

#[test]
fn help_succeeds_and_unknown_flags_fail() {
    assert_eq!(code(&segame(&["--help"], &[])), 0);
    assert_eq!(code(&segame(&["solve", "--bogus"], &[])), 1);
    assert_eq!(code(&segame(&[], &[])), 1);
}

#[test]
fn missing_scenario_is_an_io_error() {
    assert_eq!(code(&segame(&["solve", "/nonexistent/scenario.json"], &[])), 3);
}

#[test]
fn invalid_scenario_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, SMALL.replace("\"v_max\": 2.5", "\"v_max\": -1")).unwrap();
    let out = segame(&["solve", path.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("attacker.v_max"));
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(code(&segame(&["solve", path.to_str().unwrap()], &[])), 1);
}

#[test]
fn solve_writes_and_plots_a_result_directory() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("small.json");
    std::fs::write(&scenario, SMALL).unwrap();
    let out_dir = dir.path().join("out");
    let out = segame(&["solve", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["scenario.json", "solution.json", "trace.csv", "scene.svg", "convergence.svg"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    std::fs::remove_file(out_dir.join("scene.svg")).unwrap();
    assert_eq!(code(&segame(&["plot", out_dir.to_str().unwrap()], &[])), 0);
    assert!(out_dir.join("scene.svg").is_file());
    assert_eq!(code(&segame(&["plot", dir.path().to_str().unwrap()], &[])), 1);
}

#[test]
fn gradient_check_passes_on_the_case_study() {
    let out = segame(&["check-gradients", case_study().to_str().unwrap(), "--trials", "5"], &[]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn worker_variable_overrides_the_flag_without_changing_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |d: &Path| ["monte-carlo", "--trials", "3", "--no-timing", "--out", d.to_str().unwrap()].map(String::from);
    let run = |d: &Path, env: &[(&str, &str)]| segame(&args(d).iter().map(String::as_str).collect::<Vec<_>>(), env);
    assert_eq!(code(&run(&a, &[])), 0);
    assert_eq!(code(&run(&b, &[("SEGAME_WORKERS", "3")])), 0);
    let read = |d: &Path| std::fs::read(d.join("trials.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(b.join("summary.csv").is_file());
    assert_eq!(code(&run(&b, &[("SEGAME_WORKERS", "zero")])), 1);
}
