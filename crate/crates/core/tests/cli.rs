//! End-to-end runs of the command-line binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_chiral-spectra");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--quiet");
    match threads {
        Some(t) => cmd.env("CHIRAL_SPECTRA_THREADS", t),
        None => cmd.env_remove("CHIRAL_SPECTRA_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn spectrum_is_identical_across_thread_counts() {
    let cfg = config("doppler_mixture.json");
    let cfg = cfg.to_str().unwrap();
    let one = stdout(&run(&["spectrum", "--config", cfg], Some("1")));
    let four = stdout(&run(&["spectrum", "--config", cfg], Some("4")));
    assert_eq!(one, four);
    assert_eq!(one.lines().next(), Some("delta,T,I,I_norm"));
    assert_eq!(one.lines().count(), 402);
}

#[test]
fn peaks_from_saved_spectrum_match_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spectrum.csv");
    let cfg = config("doppler_mixture.json");
    let cfg = cfg.to_str().unwrap();
    stdout(&run(
        &["spectrum", "--config", cfg, "--out", csv.to_str().unwrap()],
        None,
    ));
    let from_csv: Value = serde_json::from_str(&stdout(&run(
        &[
            "peaks",
            "--config",
            cfg,
            "--spectrum",
            csv.to_str().unwrap(),
        ],
        None,
    )))
    .unwrap();
    let direct: Value =
        serde_json::from_str(&stdout(&run(&["peaks", "--config", cfg], None))).unwrap();
    let a = from_csv["dp_prime"].as_f64().unwrap();
    let b = direct["dp_prime"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
}

#[test]
fn transparent_medium_transmits_everything() {
    let cfg = config("two_peak_spectrum.json");
    let csv = stdout(&run(
        &["spectrum", "--config", cfg.to_str().unwrap(), "--zeta", "0"],
        None,
    ));
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "1");
        assert_eq!(cols[2], "0");
        assert_eq!(cols[3], "nan");
    }
}

#[test]
fn racemic_inversion_returns_zero() {
    let cfg = config("calibration_table.json");
    let out: Value = serde_json::from_str(&stdout(&run(
        &[
            "invert",
            "--config",
            cfg.to_str().unwrap(),
            "--dp-prime",
            "0",
        ],
        None,
    )))
    .unwrap();
    assert!(out["dp"].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn table_has_one_row_per_cell() {
    let cfg = config("calibration_table.json");
    let csv = stdout(&run(&["table", "--config", cfg.to_str().unwrap()], None));
    assert_eq!(csv.lines().next(), Some("zeta,omega32,dp,dp_prime"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 9);
}

#[test]
fn steady_state_has_unit_trace() {
    let cfg = config("two_peak_spectrum.json");
    let out: Value = serde_json::from_str(&stdout(&run(
        &["steady", "--config", cfg.to_str().unwrap()],
        None,
    )))
    .unwrap();
    let re = out["re"].as_array().unwrap();
    let trace: f64 = (0..3).map(|i| re[i][i].as_f64().unwrap()).sum();
    assert!((trace - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let table = config("calibration_table.json");
    let table = table.to_str().unwrap();
    assert_eq!(
        run(&["invert", "--config", table, "--dp-prime", "2"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["spectrum", "--config", "/nonexistent.json"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["bogus"], None).status.code(), Some(2));
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
    // the table scenario has no sweep section
    assert_eq!(
        run(&["spectrum", "--config", table], None).status.code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "delta,T,I,I_norm\n0,1,0,nan\n").unwrap();
    let args = [
        "peaks",
        "--config",
        table,
        "--spectrum",
        short.to_str().unwrap(),
    ];
    assert_eq!(run(&args, None).status.code(), Some(2));

    // a transparent spectrum has no peaks to normalise
    let flat = dir.path().join("flat.csv");
    let rows: String = (-10..=10).map(|d| format!("{d},1,0,nan\n")).collect();
    std::fs::write(&flat, format!("delta,T,I,I_norm\n{rows}")).unwrap();
    let args = [
        "peaks",
        "--config",
        table,
        "--spectrum",
        flat.to_str().unwrap(),
    ];
    assert_eq!(run(&args, None).status.code(), Some(3));
}
