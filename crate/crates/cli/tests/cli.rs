//! End-to-end tests of the `polarsim` binary and the sweep/bisection drivers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polarsim::config::{Model, RunConfig};
use polarsim::output::SERIES_HEADER;
use polarsim::sweep::{sweep_csv, sweep_serial, SWEEP_HEADER_PREFIX};
use polarsim::{bisect_critical_mass, sweep, CliError, SweepParam};
use polarsim_core::initial::Profile;

fn polarsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarsim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_BKS: &str = r#"{"model": "bks1d", "mass": 1.5, "t_end": 2, "z_max": 20, "n_cells": 200, "initial": {"kind": "step", "width": 0.5}}"#;

fn small_bks(mass: f64) -> RunConfig {
    let mut c = RunConfig::minimal(Model::Bks1d, mass, 20.0);
    c.z_max = Some(20.0);
    c.n_cells = Some(200);
    c.initial = Some(Profile::Step { width: 0.5 });
    c
}

#[test]
fn run_writes_the_three_outputs_and_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bks.json", SMALL_BKS);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = polarsim(&["run", "--config", path_str(&cfg), "--out", path_str(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["series.csv", "report.json", "terminal_field.csv"] {
        let x = fs::read(a.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(file)).unwrap(), "{file} differs between runs");
    }
    let series = fs::read_to_string(a.join("series.csv")).unwrap();
    assert_eq!(series.lines().next().unwrap(), SERIES_HEADER);
    assert!(fs::read_to_string(a.join("terminal_field.csv")).unwrap().starts_with("z,value\n"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    // M = 1.5 with non-increasing data blows up
    assert_eq!(report["blowup"]["detected"], true);
    assert_eq!(report["config"]["model"], "bks1d");
}

#[test]
fn two_dimensional_runs_write_y_z_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        r#"{"model": "transversal2d", "mass": 2, "t_end": 0.05, "ny": 8, "nz": 8, "y_sigma": 2}"#,
    );
    let out = tmp.path().join("out");
    let o = polarsim(&["run", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("terminal_field.csv")).unwrap();
    assert!(table.starts_with("y,z,value\n"));
    assert_eq!(table.lines().count(), 1 + 64);
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        (r#"{"model": "interval1d", "mass": 2, "t_end": 1}"#, "L"),
        (r#"{"model": "bks1d", "mass": -1, "t_end": 1}"#, "mass"),
        (r#"{"model": "heat1d", "mass": 1, "t_end": 1}"#, "model"),
        (r#"{"model": "bks1d", "t_end": 1}"#, "mass"),
    ];
    for (k, (json, key)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{k}.json"), json);
        let o = polarsim(&["run", "--config", path_str(&cfg), "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(2), "{json}");
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert!(stderr.contains(&format!("`{key}`")), "{json}: {stderr}");
    }
    let missing = tmp.path().join("absent.json");
    let o = polarsim(&["run", "--config", path_str(&missing), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), "bks.json", SMALL_BKS);
    let o = polarsim(&[
        "sweep",
        "--config",
        path_str(&cfg),
        "--param",
        "t_end",
        "--values",
        "1,2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = polarsim(&[
        "bisect",
        "--config",
        path_str(&cfg),
        "--m-lo",
        "1",
        "--m-hi",
        "2",
        "--tol",
        "0",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bracket_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bks.json", SMALL_BKS);
    let out = tmp.path().join("out");
    let o = polarsim(&[
        "bisect",
        "--config",
        path_str(&cfg),
        "--m-lo",
        "2",
        "--m-hi",
        "3",
        "--tol",
        "0.1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("blows up") || stderr.contains("blew up") || stderr.contains("detected"), "{stderr}");
}

#[test]
fn mass_sweep_separates_sub_and_supercritical_runs() {
    let values = [0.5, 0.9, 1.0, 1.1, 1.5];
    let rows = sweep(&small_bks(1.0), SweepParam::Mass, &values).unwrap();
    let flags: Vec<bool> = rows.iter().map(|r| r.detected()).collect();
    assert_eq!(&flags[..3], &[false, false, false]);
    // M = 1.1 is close enough to critical that it may still be concentrating at t_end
    assert!(flags[4]);
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), values);
}

#[test]
fn length_sweep_flips_the_interval_criterion_where_4_j0_equals_l_m() {
    let mut base = RunConfig::minimal(Model::Interval1d, 2.0, 0.1);
    base.length = Some(4.0);
    base.n_cells = Some(100);
    // unit mass density on (0, 1): J0 = M / 2 = 1, so the flip is at L = 2
    base.initial = Some(Profile::Step { width: 1.0 });
    let rows = sweep(&base, SweepParam::Length, &[1.5, 1.9, 2.1, 5.0]).unwrap();
    let flags: Vec<Option<bool>> = rows.iter().map(|r| r.result.criterion).collect();
    assert_eq!(flags, [Some(false), Some(false), Some(true), Some(true)]);
}

#[test]
fn concurrent_and_serial_sweeps_agree() {
    let values = [0.6, 0.8, 1.2];
    let par = sweep(&small_bks(1.0), SweepParam::Mass, &values).unwrap();
    let ser = sweep_serial(&small_bks(1.0), SweepParam::Mass, &values).unwrap();
    assert_eq!(par, ser);
    assert_eq!(sweep_csv(&par), sweep_csv(&ser));
    assert!(sweep_csv(&par).starts_with(SWEEP_HEADER_PREFIX));
}

#[test]
fn sweep_command_writes_a_table_and_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bks.json", SMALL_BKS);
    let out = tmp.path().join("sweep");
    let o = polarsim(&[
        "sweep",
        "--config",
        path_str(&cfg),
        "--param",
        "J0-scale",
        "--values",
        "0.5,4",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("run_000/series.csv").exists() && out.join("run_001/report.json").exists());
}

#[test]
fn coarse_bisection_needs_at_most_two_batches() {
    let b = bisect_critical_mass(&small_bks(1.0), 0.5, 2.0, 0.5).unwrap();
    assert!(b.batches <= 2, "{b:?}");
    assert!(b.bracket.1 - b.bracket.0 <= 0.5);
    assert!(b.bracket.0 <= b.estimate && b.estimate <= b.bracket.1);
    assert!(b.probes[0].mass == 0.5 && !b.probes[0].detected && b.probes[1].detected);
}

#[test]
fn bisect_command_brackets_the_critical_mass() {
    let tmp = tempfile::tempdir().unwrap();
    // 200 cells blur the threshold up to about 1.2; 400 resolve it
    let json = SMALL_BKS.replace("\"t_end\": 2", "\"t_end\": 20").replace("\"n_cells\": 200", "\"n_cells\": 400");
    let cfg = write_config(tmp.path(), "bks.json", &json);
    let out = tmp.path().join("bisect");
    let o = polarsim(&[
        "bisect",
        "--config",
        path_str(&cfg),
        "--m-lo",
        "0.5",
        "--m-hi",
        "2",
        "--tol",
        "0.1",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bisect.json")).unwrap()).unwrap();
    let estimate = b["estimate"].as_f64().unwrap();
    assert!((0.95..=1.10).contains(&estimate), "{estimate}");
}

#[test]
fn bracket_error_reports_both_outcomes() {
    match bisect_critical_mass(&small_bks(1.0), 2.0, 3.0, 0.1) {
        Err(CliError::Bracket { lo_detected, hi_detected, .. }) => assert!(lo_detected && hi_detected),
        other => panic!("{other:?}"),
    }
}
