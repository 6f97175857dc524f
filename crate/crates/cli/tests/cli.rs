//! End-to-end checks of the `hct` binary: exit codes, produced files, and the
//! synth round trip.

use std::path::{Path, PathBuf};
use std::process::Command;

fn hct() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hct"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hct-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

#[test]
fn run_produces_trace_aggregate_and_plots() {
    let dir = temp_dir("run");
    let config = dir.join("exp.cfg");
    write(
        &config,
        "algorithm = adam\nsynth_rows = 200\nsynth_features = 4\nhidden_dims = 6\n\
         budget_secs = 0.2\nrepeats = 2\nper_group = 8\neval_interval = 10\n",
    );
    let out = dir.join("out");
    let status = hct()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("trace_seed0.csv").exists());
    assert!(out.join("trace_seed1.csv").exists());
    assert!(out.join("aggregate.csv").exists());
    assert!(out.join("plot_loss.csv").exists());
    assert!(out.join("plot_c0.csv").exists());
}

#[test]
fn flags_override_config_keys() {
    let dir = temp_dir("override");
    let config = dir.join("exp.cfg");
    write(
        &config,
        "algorithm = adam\nsynth_rows = 200\nsynth_features = 4\nhidden_dims = 6\n\
         budget_secs = 0.2\nrepeats = 5\nper_group = 8\n",
    );
    let out = dir.join("out");
    let status = hct()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--repeats", "1", "--seed", "11", "--algorithm", "ssw"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("trace_seed11.csv").exists());
    assert!(!out.join("trace_seed12.csv").exists());
}

#[test]
fn compare_emits_aggregates_for_all_three_algorithms() {
    let dir = temp_dir("compare");
    let config = dir.join("exp.cfg");
    write(
        &config,
        "synth_rows = 200\nsynth_features = 4\nhidden_dims = 6\n\
         budget_secs = 0.2\nrepeats = 2\nper_group = 8\neval_interval = 10\n",
    );
    let out = dir.join("out");
    let status = hct()
        .args(["compare", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for algorithm in ["adam", "ssl-alm", "ssw"] {
        let sub = out.join(algorithm);
        assert!(sub.join("aggregate.csv").exists(), "missing {algorithm}");
        assert!(sub.join("trace_seed0.csv").exists());
    }
}

#[test]
fn synth_output_reloads_in_the_declared_schema() {
    let dir = temp_dir("synth");
    let csv = dir.join("toy.csv");
    let status = hct()
        .args(["synth", "--rows", "120", "--features", "3", "--groups", "3"])
        .args(["--positive-rates", "0.9,0.5,0.1", "--seed", "4", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let ds = hct_core::data::load_csv(&csv, "label", "group").unwrap();
    assert_eq!(ds.len(), 120);
    assert_eq!(ds.features.cols(), 3);
    assert_eq!(ds.group_count, 3);

    // The generated CSV feeds back into a run.
    let config = dir.join("exp.cfg");
    write(
        &config,
        &format!(
            "csv_path = {}\nhidden_dims = 4\nbudget_secs = 0.2\nrepeats = 1\nper_group = 4\n",
            csv.display()
        ),
    );
    let out = dir.join("out");
    let status = hct()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("aggregate.csv").exists());
}

#[test]
fn check_subcommand_passes() {
    let status = hct().args(["check", "--configs", "5"]).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn bad_invocations_exit_1() {
    assert_eq!(
        hct().args(["run", "--config", "/no/such/file"]).status().unwrap().code(),
        Some(1)
    );
    assert_eq!(hct().arg("--bogus-flag").status().unwrap().code(), Some(1));

    let dir = temp_dir("badcfg");
    let config = dir.join("bad.cfg");
    write(&config, "unknown_key = 1\n");
    assert_eq!(
        hct().args(["run", "--config"]).arg(&config).status().unwrap().code(),
        Some(1)
    );
}
