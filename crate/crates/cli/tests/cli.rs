//! End-to-end checks of the command-line surface and its exit codes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rectsim"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rectsim_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_scenario(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_exports_a_trace_and_reports_a_summary() {
    let dir = temp_dir("run");
    let scenario = write_scenario(
        &dir,
        "short.toml",
        "[engine]\nt_end = 100e-6\nrecord_decimation = 50\n",
    );
    let out = bin()
        .args(["run"])
        .arg(&scenario)
        .arg("--out")
        .arg(&dir)
        .args(["--channels", "v_dda,boost_v_out"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("run summary"), "{stdout}");
    assert!(stdout.contains("rectifier"));

    let csv = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,v_dda,boost_v_out");
    assert!(lines.count() > 100);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = temp_dir("sweep");
    let scenario = write_scenario(
        &dir,
        "base.toml",
        "boost_enabled = false\ntopology_tag = \"FULL_WAVE\"\n[engine]\nt_end = 50e-6\n",
    );
    let out = bin()
        .args(["sweep"])
        .arg(&scenario)
        .args(["--axis", "source.v_ll_peak", "--values", "2.0,3.3"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.starts_with("source.v_ll_peak,"));
}

#[test]
fn describe_topologies_lists_all_four() {
    let out = bin().arg("describe-topologies").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["FULL_WAVE", "DUAL_STAGE", "QUASI_SINGLE", "SINGLE_STAGE"] {
        assert!(stdout.contains(name), "missing {name} in {stdout}");
    }
    assert_eq!(stdout.matches("descriptor only").count(), 2);
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = temp_dir("cfg");
    // unknown key
    let bad = write_scenario(&dir, "bad.toml", "not_a_key = 1.0\n");
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // descriptor-only topology refuses to run
    let descr = write_scenario(&dir, "descr.toml", "topology_tag = \"SINGLE_STAGE\"\n");
    let out = bin().arg("run").arg(&descr).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not implemented"), "{err}");

    // invalid value
    let neg = write_scenario(&dir, "neg.toml", "load = -4.0\n");
    let out = bin().arg("run").arg(&neg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_failure() {
    let out = bin().args(["run", "/no/such/file.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exported_trace_round_trips_through_the_parser() {
    let dir = temp_dir("roundtrip");
    let scenario = write_scenario(
        &dir,
        "s.toml",
        "[engine]\nt_end = 60e-6\nrecord_decimation = 20\n",
    );
    let out = bin()
        .args(["run"])
        .arg(&scenario)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    let cols = rectsim_core::analysis::import_csv(&text).unwrap();
    assert_eq!(cols[0].0, "time");
    // all channels plus time, rows parse as exact floats
    assert_eq!(cols.len(), rectsim_core::Trace::channel_names().len() + 1);
    assert!(cols[0].1.len() > 100);
}
