use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spinforge_cli::output::Table;

fn spinforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinforge"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spinforge runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const WEAK: &[&str] = &["--protocol", "weak_css", "--N", "4", "--g", "5kHz", "--delta", "60kHz", "--model", "effective"];

fn with(base: &[&'static str], extra: &[&'static str]) -> Vec<&'static str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn zero_force_reads_zero_within_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinforge(&with(&["simulate"], &with(WEAK, &["--force", "0N"])), dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("simulate_meta.json")).unwrap()).unwrap();
    let force = &meta["report"]["readout"]["force"];
    let (value, unc) = (force["value"].as_f64().unwrap(), force["uncertainty"].as_f64().unwrap());
    assert!(unc > 0.0 && value.abs() < 1e-3 * unc, "{value} +- {unc}");
    let csv = std::fs::read_to_string(dir.path().join("simulate_data.csv")).unwrap();
    let table = Table::parse_csv(&csv).unwrap();
    assert_eq!(table.columns[0], "t_ms");
    assert!(!csv.contains('\r'));
}

#[test]
fn bad_unit_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinforge(&["simulate", "--protocol", "weak_css", "--N", "4", "--g", "5parsec"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("params.g_x"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[params]\nspin_count = 2\ng_xx = 3\n").unwrap();
    let out = spinforge(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("g_xx"), "{}", stderr(&out));
}

#[test]
fn config_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[protocol]\nkind = \"ghz_parity\"\nmodel = \"effective\"\nevolve_time = \"10ms\"\n\n\
         [params]\nspin_count = 2\ng_x = \"5kHz\"\ndelta_x = \"100kHz\"\nf_dx = \"2yN\"\nr0_x = \"15nm\"\n\n\
         [grid]\nwindow_end = 40\n\n[output]\ndir = \"out\"\n",
    )
    .unwrap();
    let out = spinforge(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("out/simulate_data.csv").exists());
}

#[test]
fn cutoff_overflow_exits_4_and_clears_stale_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let strong = [
        "simulate", "--protocol", "strong_phonon", "--N", "1", "--g", "2.5kHz", "--delta", "0.5kHz", "--Delta", "300kHz",
        "--force", "3yN", "--model", "full",
    ];
    let ok = spinforge(&strong, dir.path());
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert!(dir.path().join("simulate_data.csv").exists());

    let out = spinforge(&with(&strong, &["--cutoff", "4", "--max-cutoff", "6"]), dir.path());
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(!dir.path().join("simulate_data.csv").exists());
    assert!(!dir.path().join("simulate_meta.json").exists());
}

#[test]
fn sweep_isolates_failing_points() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--protocol", "strong_phonon", "--N", "1", "--g", "2.5kHz", "--delta", "0.5kHz", "--Delta", "300kHz",
        "--force", "3yN", "--model", "effective", "--axis", "g_x", "--values", "1kHz,2kHz,30kHz", "--search",
    ];
    let out = Command::new(env!("CARGO_BIN_EXE_spinforge"))
        .args(args)
        .current_dir(dir.path())
        .env("SPINFORGE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("3/3"));
    let table = Table::parse_csv(&std::fs::read_to_string(dir.path().join("sweep_data.csv")).unwrap()).unwrap();
    assert_eq!(table.column("value").unwrap(), vec![1.0, 2.0, 30.0]);
    assert_eq!(table.column("ok").unwrap(), vec![1.0, 1.0, 0.0]);
    assert!(table.column("min_force").unwrap()[..2].iter().all(|f| f.is_finite() && *f > 0.0));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep_meta.json")).unwrap()).unwrap();
    let failures = meta["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["index"], 2);
}

#[test]
fn sweep_without_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinforge(&with(&["sweep"], WEAK), dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sweep.axis"));
}

#[test]
fn analytic_quotes() {
    let dir = tempfile::tempdir().unwrap();
    let fmin = spinforge(
        &["analytic", "fmin", "--g", "2.5kHz", "--delta", "0.14kHz", "--Delta", "270kHz", "--r0", "14.5nm", "--t", "38.6ms"],
        dir.path(),
    );
    assert_eq!(code(&fmin), 0, "{}", stderr(&fmin));
    let text = stdout(&fmin);
    let xn: f64 = text
        .lines()
        .find(|l| l.contains("xN/sqrt(Hz)"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((66.0..=68.5).contains(&xn), "{text}");

    let ghz = spinforge(&["analytic", "ghz", "--N", "6", "--delta", "100kHz", "--g", "5kHz", "--r0", "15nm", "--t", "10ms"], dir.path());
    let text = stdout(&ghz);
    let yn: f64 = text
        .lines()
        .find(|l| l.contains("yN/sqrt(Hz)"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((yn / 0.117 - 1.0).abs() < 0.02, "{text}");
}

#[test]
fn analytic_missing_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinforge(&["analytic", "ghz", "--g", "5kHz", "--t", "10ms"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--delta"));
}

#[test]
fn unknown_figure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinforge(&["figure", "9", "--out", "."], dir.path());
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("fig9_data.csv").exists());
}

#[test]
fn figure_four_takes_custom_detunings() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinforge(&["figure", "4", "--deltas", "0.2kHz", "--points", "5", "--out", "."], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = Table::parse_csv(&std::fs::read_to_string(dir.path().join("fig4_data.csv")).unwrap()).unwrap();
    assert_eq!(table.columns, ["g_x", "sensitivity_numeric_delta0.2", "sensitivity_analytic_delta0.2", "t_ms_delta0.2"]);
    assert_eq!(table.column("g_x").unwrap().len(), 5);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig4_meta.json")).unwrap()).unwrap();
    assert!(meta["version"].is_string());
    assert!(meta["tolerances"].is_object());
}
