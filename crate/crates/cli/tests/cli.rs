//! Exit codes and file products of the command-line driver.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn andersonqed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_andersonqed"))
        .args(args)
        .env_remove("ANDERSONQED_WORKERS")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    let text = format!("output_dir = \"{}\"\n{body}", dir.join("out").display());
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"workers = 1
loss_lengths_mm = ["inf", 2.5]

[ensemble]
n_realizations = 3
master_seed = 9

[ensemble.disorder]
delta_n = 0.86
sample_length_um = 8.0

[cqed]
a_eff_um2 = 0.04

[extraction]
coarse_points = 800

[xi_calibration]
delta_n = [0.0, 0.86]
n_realizations = 100
"#;

#[test]
fn valid_config_exits_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = andersonqed(&["validate-config", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("configuration is valid"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad_value = write_config(dir.path(), &SMALL.replace("delta_n = 0.86\n", "delta_n = -1.0\n"));
    assert_eq!(
        code(&andersonqed(&["validate-config", "--config", &bad_value])),
        2
    );

    let unknown_key = write_config(dir.path(), &format!("{SMALL}\n[extras]\nfoo = 1\n"));
    assert_eq!(
        code(&andersonqed(&["validate-config", "--config", &unknown_key])),
        2
    );

    let good = write_config(dir.path(), SMALL);
    assert_eq!(
        code(&andersonqed(&[
            "validate-config",
            "--config",
            &good,
            "--workers",
            "0"
        ])),
        2
    );
    assert_eq!(
        code(&andersonqed(&["run", "--config", "/nonexistent/run.toml"])),
        2
    );
    assert_eq!(
        code(&andersonqed(&["export", "--config", &good, "--figure", "fig-9"])),
        2
    );
    // usage errors from the argument parser
    assert_eq!(code(&andersonqed(&["run"])), 2);
}

#[test]
fn steps_out_of_order_exit_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = andersonqed(&["export", "--config", &cfg]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("run"));
    assert_eq!(code(&andersonqed(&["calibrate-aeff", "--config", &cfg])), 3);
}

#[test]
fn run_export_resume_and_xi_calibration() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");

    let run = andersonqed(&["run", "--config", &cfg, "--seed", "11"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("lossless: p = "));
    for f in [
        "manifest.json",
        "realizations.jsonl",
        "sc_prob.csv",
        "q_hist_l2.5mm.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 11"));

    let before = fs::read(out_dir.join("v_hist.csv")).unwrap();
    let export = andersonqed(&["export", "--config", &cfg, "--figure", "v-hist"]);
    assert_eq!(code(&export), 0);
    assert_eq!(fs::read(out_dir.join("v_hist.csv")).unwrap(), before);

    let resume = andersonqed(&["run", "--config", &cfg, "--seed", "11", "--resume"]);
    assert_eq!(code(&resume), 0, "{}", String::from_utf8_lossy(&resume.stderr));

    let xi = andersonqed(&["xi-calibrate", "--config", &cfg, "--workers", "auto"]);
    assert_eq!(code(&xi), 0, "{}", String::from_utf8_lossy(&xi.stderr));
    let table = fs::read_to_string(out_dir.join("xi_calibration.csv")).unwrap();
    assert!(table.starts_with("delta_n,xi_m,stderr_m,xi_dn2_m,n,status\n"));
    assert!(table.lines().nth(1).unwrap().ends_with("no decay"));
}
