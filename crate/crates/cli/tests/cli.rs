use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use secthru::config::RunConfig;
use secthru::output::{read_csv, rederive, Row, COLUMNS};
use secthru_core::region::check_convexity_points;

fn secthru(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secthru")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn record(o: &Output) -> Vec<(String, String)> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn field(rec: &[(String, String)], key: &str) -> String {
    rec.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone()).unwrap_or_else(|| panic!("no {key} in {rec:?}"))
}

const SMALL: [&str; 4] = ["--set", "nodes=8", "--set", "num_lambda=9"];

#[test]
fn point_record_has_the_csv_fields_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["point", "--lambda0", "0.3", "--set", "nodes=8", "--out", "p.txt"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let keys: Vec<String> = record(&o).into_iter().map(|(k, _)| k).collect();
    assert_eq!(keys, COLUMNS);
    assert_eq!(fs::read(dir.path().join("p.txt")).unwrap(), o.stdout);
}

#[test]
fn common_only_weight_reports_no_confidential_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["point", "--lambda0", "1"], dir.path());
    assert_eq!(code(&o), 0);
    let rec = record(&o);
    assert_eq!(field(&rec, "C1_bps_hz"), "0");
    assert!(field(&rec, "C0_bps_hz").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn zero_snr_gives_the_origin() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["point", "--lambda0", "0.5", "--set", "snr_db=-inf"], dir.path());
    assert_eq!(code(&o), 0);
    let rec = record(&o);
    assert_eq!(field(&rec, "C0_bps_hz"), "0");
    assert_eq!(field(&rec, "C1_bps_hz"), "0");
}

#[test]
fn reference_point_matches_the_pinned_anchors() {
    // minted from the first run; the 64x64 sweep around it passes the convexity check
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["point", "--lambda0", "0.5"], dir.path());
    assert_eq!(code(&o), 0);
    let rec = record(&o);
    let num = |k: &str| field(&rec, k).parse::<f64>().unwrap();
    assert!((num("C0_bps_hz") - 0.7951263773908008).abs() < 1e-9);
    assert!((num("C1_bps_hz") - 0.12189304094074557).abs() < 1e-9);
    assert!((num("kappa") - 0.2638778235117801).abs() < 1e-8);
    assert!((num("power_used") - 1.0).abs() < 1e-6);
    assert_eq!(field(&rec, "case"), "IIIB");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "theta = [").unwrap();
    for args in [
        &["point", "--lambda0", "1.5"][..],
        &["point", "--lambda0", "0.5", "--set", "thetta=1"],
        &["point", "--lambda0", "0.5", "--set", "gamma=-1"],
        &["point", "--lambda0", "0.5", "--config", "missing.toml"],
        &["point", "--lambda0", "0.5", "--config", "bad.toml"],
        &["region", "--set", "num_lambda=1"],
        &["point"],
    ] {
        let o = secthru(args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numeric_failure_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["point", "--lambda0", "0.5", "--set", "nodes=8", "--set", "max_kappa_iter=1"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric failure"));
}

#[test]
fn config_file_is_read_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "nodes = 8\nnum_lambda = 3\ncsv = \"from_file.csv\"\ntheta = 1e-4\n").unwrap();
    let o = secthru(&["region", "--config", "run.toml", "--set", "num_lambda=4"], dir.path());
    assert_eq!(code(&o), 0);
    let rows = read_csv(fs::File::open(dir.path().join("from_file.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
}

#[test]
fn two_weights_give_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["region", "--set", "nodes=8", "--set", "num_lambda=2", "--csv", "-"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].lambda0, rows[1].lambda0), (0.0, 1.0));
}

#[test]
fn all_failed_sweep_keeps_the_status_column_and_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["region", "--set", "nodes=8", "--set", "num_lambda=3", "--set", "max_kappa_iter=1"], dir.path());
    assert_eq!(code(&o), 4);
    let rows = read_csv(fs::File::open(dir.path().join("region.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r.status.starts_with("failed: "));
        assert!(r.c0.is_none() && r.c1.is_none() && r.case.is_none() && r.kappa.is_none());
    }
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["region", "--set", "nodes=6", "--set", "num_lambda=5", "--set", "grid_method=monte-carlo", "--set", "seed=7"];
    assert_eq!(code(&secthru(&[&args[..], &["--csv", "a.csv", "--svg", "a.svg"]].concat(), dir.path())), 0);
    assert_eq!(code(&secthru(&[&args[..], &["--csv", "b.csv", "--svg", "b.svg"]].concat(), dir.path())), 0);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    let svg = fs::read_to_string(dir.path().join("a.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("C0 (bits/s/Hz)"));
    assert_eq!(svg, fs::read_to_string(dir.path().join("b.svg")).unwrap());
}

#[test]
fn reference_sweep_is_convex_and_every_row_rederives() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["region"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<Row> = read_csv(fs::File::open(dir.path().join("region.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 33);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.c0.unwrap(), r.c1.unwrap())).collect();
    let c = check_convexity_points(&pts);
    assert!(c.ok, "{c:?}");
    let cfg = RunConfig::default();
    let (g, q) = (cfg.grid().unwrap(), cfg.qos().unwrap());
    for r in &rows {
        let t = rederive(&g, &q, r).unwrap();
        assert!((t.c0 - r.c0.unwrap()).abs() < 1e-9, "{r:?} -> {t:?}");
        assert!((t.c1 - r.c1.unwrap()).abs() < 1e-9, "{r:?} -> {t:?}");
    }
}

#[test]
fn default_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = secthru(&["verify"], dir.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.contains(" PASS ")).count(), 6, "{out}");
}

#[test]
fn injected_faults_fail_their_checks() {
    let dir = tempfile::tempdir().unwrap();
    for (fault, check) in [("beta-sign-flip", "Holder / time sharing"), ("zc-mu1", "policy invariants")] {
        let o = secthru(&[&["verify", "--inject-fault", fault][..], &SMALL].concat(), dir.path());
        assert_eq!(code(&o), 5, "{fault}");
        let out = String::from_utf8_lossy(&o.stdout);
        let failed: Vec<&str> = out.lines().filter(|l| l.contains(" FAIL ")).collect();
        assert_eq!(failed.len(), 1, "{fault}: {out}");
        assert!(failed[0].starts_with(check), "{fault}: {out}");
    }
}

#[test]
fn help_documents_the_defaults() {
    let o = secthru(&["region", "--help"], Path::new("."));
    assert_eq!(code(&o), 0);
    let help = String::from_utf8_lossy(&o.stdout);
    for key in ["theta", "snr_db", "num_lambda", "grid_method", "Exit codes"] {
        assert!(help.contains(key), "{key}");
    }
}
