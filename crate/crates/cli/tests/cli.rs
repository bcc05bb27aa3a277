//! Behavior of the installed binary: exit codes, override flags, and the
//! promise that one bad input degrades a run instead of killing it. Every
//! test drives the real executable in a scratch directory.

use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fanox"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should spawn")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small, fast, noiseless run: five angles, a coarse grid, no bootstrap.
const FAST_CONFIG: &str = r#"
noiseless = true
angles_urad = [-2.0, -1.0, 0.0, 1.0, 2.0]

[grid]
step = 5000.0

[fit]
n_starts = 12

[phases]
n_boot = 0
"#;

fn write_config(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).expect("config should write");
}

#[test]
fn unknown_config_keys_fail_with_the_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.toml", "sead = 3\n");
    let out = run_in(tmp.path(), &["simulate", "run.toml"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    // The offending key must be named, not just "invalid config".
    assert!(stderr(&out).contains("sead"));
}

#[test]
fn malformed_toml_fails_with_the_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.toml", "angles_urad = [1.0,\n");
    let out = run_in(tmp.path(), &["simulate", "run.toml"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}

#[test]
fn zero_worker_threads_fail_with_the_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.toml", FAST_CONFIG);
    let out = run_in(tmp.path(), &["simulate", "run.toml", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("--jobs"));
}

#[test]
fn colliding_angle_labels_fail_before_any_stage_runs() {
    let tmp = tempfile::tempdir().unwrap();
    // 1.0 and 1.0001 both label as p1_000 at the file-name resolution.
    write_config(tmp.path(), "run.toml", "angles_urad = [1.0, 1.0001]\n");
    let out = run_in(tmp.path(), &["simulate", "run.toml"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("collide"));
    assert!(!tmp.path().join("out/spectra").exists());
}

#[test]
fn fit_before_simulate_fails_with_the_data_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.toml", FAST_CONFIG);
    let out = run_in(tmp.path(), &["fit", "run.toml"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("manifest.json"));
}

#[test]
fn report_on_an_empty_run_fails_with_the_data_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.toml", FAST_CONFIG);
    let out = run_in(tmp.path(), &["report", "run.toml"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn the_out_and_seed_overrides_are_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let noisy = "angles_urad = [2.0]\nexposure = 1e4\n\n[grid]\nstep = 5000.0\n";
    write_config(tmp.path(), "run.toml", noisy);

    for (dir, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = run_in(
            tmp.path(),
            &["simulate", "run.toml", "--out", dir, "--seed", seed],
        );
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    let read =
        |d: &str| std::fs::read(tmp.path().join(d).join("spectra/angle_p2_000.txt")).unwrap();
    assert!(!tmp.path().join("out").exists(), "--out was ignored");
    assert_eq!(read("a"), read("b"), "same seed must give the same draw");
    assert_ne!(read("c"), read("a"), "the seed override changed nothing");
}

#[test]
fn a_corrupt_spectrum_is_recorded_per_angle_and_the_run_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let config = "noiseless = true\nangles_urad = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]\n\n\
                  [grid]\nstep = 5000.0\n\n[fit]\nn_starts = 12\n\n[phases]\nn_boot = 0\n";
    write_config(tmp.path(), "run.toml", config);

    let out = run_in(tmp.path(), &["simulate", "run.toml"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    std::fs::write(
        tmp.path().join("out/spectra/angle_p2_000.txt"),
        "not a spectrum\n",
    )
    .unwrap();

    // The fit stage must finish, flag the bad angle, and fit the rest.
    let out = run_in(tmp.path(), &["fit", "run.toml"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/fits/angle_p2_000.json")).unwrap(),
    )
    .unwrap();
    assert!(report["error"].as_str().unwrap().starts_with("parse:"));
    assert!(report["fano"].is_null());
    let good: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/fits/angle_m2_000.json")).unwrap(),
    )
    .unwrap();
    assert!(good["error"].is_null());
    assert!(good["fano"]["q_re"].is_number());

    // Downstream stages run on the surviving angles and document the gap.
    let out = run_in(tmp.path(), &["phases", "run.toml"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let inputs: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/phases/inputs.json")).unwrap(),
    )
    .unwrap();
    let used: Vec<f64> = inputs["angles_used"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(used, vec![-3.0, -2.0, -1.0, 1.0, 3.0]);
    let skipped = inputs["skipped"].as_array().unwrap();
    assert!(skipped
        .iter()
        .any(|s| s[0].as_f64() == Some(2.0) && s[1].as_str().unwrap().contains("parse")));

    let out = run_in(tmp.path(), &["report", "run.toml"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report = std::fs::read_to_string(tmp.path().join("out/report.md")).unwrap();
    assert!(report.contains("parse:"));
}
