//! End-to-end ensemble runs on short stacks: determinism, resume, failure
//! isolation, manifest integrity and calibration.

use std::fs;
use std::path::Path;

use andersonqed::ensemble::{
    calibrate_aeff, calibrate_aeff_in, export_figure, load_manifest, load_records, run_ensemble,
    verify_manifest, xi_calibrate, ConfigSnapshot, Figure, Overrides, RealizationStatus, RunConfig,
    RunOptions, Workers, MANIFEST_FILE, RECORDS_FILE,
};
use andersonqed::stack::DisorderSpec;
use andersonqed::Error;
use tempfile::TempDir;

fn config_text(dir: &Path, delta_n: f64, realizations: usize, length_um: f64, workers: usize) -> String {
    format!(
        r#"output_dir = "{}"
workers = {workers}
loss_lengths_mm = ["inf", 2.5, 0.7]

[ensemble]
n_realizations = {realizations}
master_seed = 77

[ensemble.disorder]
delta_n = {delta_n}
sample_length_um = {length_um}

[cqed]
a_eff_um2 = 0.04

[extraction]
coarse_points = 1500
"#,
        dir.display()
    )
}

fn snapshot(dir: &Path, delta_n: f64, realizations: usize, length_um: f64, workers: usize) -> ConfigSnapshot {
    ConfigSnapshot::parse(&config_text(dir, delta_n, realizations, length_um, workers)).unwrap()
}

/// Every file of a run directory except the manifest (which holds
/// wall-clock times), as sorted `(name, bytes)`.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != MANIFEST_FILE)
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn outputs_do_not_depend_on_workers_or_interruption() {
    let (a, b, c) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    // more than one checkpoint chunk
    let n = 60;
    let one = snapshot(a.path(), 0.86, n, 12.0, 1);
    let eight = snapshot(b.path(), 0.86, n, 12.0, 8);
    let ma = run_ensemble(&one, &RunOptions::default()).unwrap();
    let mb = run_ensemble(&eight, &RunOptions::default()).unwrap();
    assert!(ma.is_complete());
    let files = outputs(a.path());
    assert!(files.iter().any(|(n, _)| n == "sc_prob.csv"));
    assert!(files.iter().any(|(n, _)| n == "q_hist_l2.5mm.csv"));
    assert_eq!(files, outputs(b.path()));
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.statistics, mb.statistics);
    assert!(ma.statistics.as_ref().unwrap().modes > 0);

    // interrupted after the first chunk, then resumed
    let interrupted = snapshot(c.path(), 0.86, n, 12.0, 1);
    let partial = run_ensemble(
        &interrupted,
        &RunOptions {
            stop_after: Some(1),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(!partial.is_complete());
    assert_eq!(partial.completed, 50);
    assert!(partial.statistics.is_none());
    match export_figure(c.path(), Figure::ScProb) {
        Err(Error::Missing(msg)) => assert!(msg.contains("run --resume"), "{msg}"),
        other => panic!("expected a missing-step error, got {other:?}"),
    }
    // a torn write after the checkpoint is discarded on resume
    let mut records = fs::read_to_string(c.path().join(RECORDS_FILE)).unwrap();
    records.push_str("{\"index\": 50, \"trunc");
    fs::write(c.path().join(RECORDS_FILE), records).unwrap();
    let resumed = run_ensemble(
        &interrupted,
        &RunOptions {
            resume: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(resumed.is_complete());
    assert_eq!(outputs(c.path()), files);
    assert_eq!(resumed.files, ma.files);
}

#[test]
fn a_poisoned_realization_is_isolated() {
    let dir = TempDir::new().unwrap();
    let snap = snapshot(dir.path(), 0.86, 21, 6.0, 2);
    let m = run_ensemble(
        &snap,
        &RunOptions {
            poison: vec![3],
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(m.failed(), 1);
    let failed: Vec<_> = m
        .realizations
        .iter()
        .filter(|r| r.status == RealizationStatus::Failed)
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].index, 3);
    assert!(failed[0].error.is_some());
    let stats = m.statistics.unwrap();
    assert_eq!((stats.realizations, stats.failed), (20, 1));
    for l in &stats.per_loss {
        assert_eq!(l.strong_coupling.n, 20);
    }
    let records = load_records(dir.path()).unwrap();
    assert_eq!(records.len(), 21);
    assert!(records.iter().enumerate().all(|(i, r)| r.index == i));
    assert!(!records[3].is_ok() && records[3].modes.is_empty());

    // the other realizations are untouched by the failure
    let clean_dir = TempDir::new().unwrap();
    run_ensemble(
        &snapshot(clean_dir.path(), 0.86, 21, 6.0, 2),
        &RunOptions::default(),
    )
    .unwrap();
    let clean = load_records(clean_dir.path()).unwrap();
    for i in (0..21).filter(|&i| i != 3) {
        assert_eq!(records[i], clean[i]);
    }
}

#[test]
fn too_many_failures_fail_the_run() {
    let dir = TempDir::new().unwrap();
    let snap = snapshot(dir.path(), 0.86, 10, 6.0, 1);
    let err = run_ensemble(
        &snap,
        &RunOptions {
            poison: vec![2],
            ..RunOptions::default()
        },
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::TooManyFailures { failed: 1, total: 10 }),
        "{err}"
    );
    assert!(!err.is_config_error());
    // the manifest still records what happened
    assert_eq!(load_manifest(dir.path()).unwrap().failed(), 1);
}

#[test]
fn manifest_lists_verified_files_and_round_trips_the_config() {
    let dir = TempDir::new().unwrap();
    let snap = snapshot(dir.path(), 0.86, 6, 10.0, 1)
        .with_overrides(&Overrides {
            master_seed: Some(4242),
            workers: Some(Workers::Count(2)),
            a_eff: None,
        })
        .unwrap();
    assert_eq!(snap.config().ensemble.master_seed, 4242);
    let m = run_ensemble(&snap, &RunOptions::default()).unwrap();
    assert_eq!(m.master_seed, 4242);
    assert_eq!(m.realizations.len(), 6);
    verify_manifest(dir.path()).unwrap();
    for f in &m.files {
        assert!(dir.path().join(&f.name).exists(), "{}", f.name);
    }
    let names: Vec<&str> = m.files.iter().map(|f| f.name.as_str()).collect();
    for expected in [
        "ldos_map.csv",
        "v_hist.csv",
        "q_hist_lossless.csv",
        "q_hist_l0.7mm.csv",
        "sc_prob.csv",
        RECORDS_FILE,
    ] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
    assert_eq!(
        &RunConfig::from_toml_str(&m.config_snapshot).unwrap(),
        snap.config()
    );

    // exports are idempotent and keep the digests valid
    let before = outputs(dir.path());
    for fig in Figure::ALL {
        export_figure(dir.path(), fig).unwrap();
    }
    assert_eq!(outputs(dir.path()), before);
    verify_manifest(dir.path()).unwrap();

    let sc = fs::read_to_string(dir.path().join("sc_prob.csv")).unwrap();
    let mut lines = sc.lines();
    assert_eq!(lines.next(), Some("xi_m,loss_length_m,p,ci_lo,ci_hi,n"));
    assert_eq!(lines.count(), 3);

    fs::write(dir.path().join("v_hist.csv"), "tampered\n").unwrap();
    assert!(matches!(verify_manifest(dir.path()), Err(Error::Missing(_))));
}

#[test]
fn no_disorder_gives_no_modes() {
    let dir = TempDir::new().unwrap();
    let m = run_ensemble(&snapshot(dir.path(), 0.0, 2, 10.0, 1), &RunOptions::default()).unwrap();
    let stats = m.statistics.unwrap();
    assert_eq!(m.realizations.len(), 2);
    assert_eq!(stats.modes, 0);
    assert!(stats.per_loss.iter().all(|l| l.strong_coupling.p == 0.0));
    let header = "edge_lo,edge_hi,count,density\n";
    assert_eq!(fs::read_to_string(dir.path().join("v_hist.csv")).unwrap(), header);
    assert_eq!(
        fs::read_to_string(dir.path().join("q_hist_lossless.csv")).unwrap(),
        header
    );

    let records = load_records(dir.path()).unwrap();
    assert!(matches!(
        calibrate_aeff(&records, 1e-20),
        Err(Error::Validation { .. })
    ));
}

#[test]
fn aeff_calibration_hits_the_target() {
    let dir = TempDir::new().unwrap();
    let snap = snapshot(dir.path(), 0.86, 12, 30.0, 1);
    run_ensemble(&snap, &RunOptions::default()).unwrap();
    let records = load_records(dir.path()).unwrap();
    let target = snap.config().target_v();
    let cal = calibrate_aeff(&records, target).unwrap();
    let doubled = calibrate_aeff(&records, 2.0 * target).unwrap();
    assert!((doubled.a_eff_m2 / cal.a_eff_m2 - 2.0).abs() < 1e-15);
    assert!(cal.a_eff_m2 > 1e-15 && cal.a_eff_m2 < 1e-12, "{:e}", cal.a_eff_m2);

    let stored = calibrate_aeff_in(dir.path()).unwrap();
    assert_eq!(stored, cal);
    let m = load_manifest(dir.path()).unwrap();
    assert_eq!(m.calibration, Some(cal));
    let v_min = m.statistics.unwrap().min_mode_volume_m3.unwrap();
    assert!((v_min / target - 1.0).abs() < 1e-12, "{v_min:e} vs {target:e}");
    verify_manifest(dir.path()).unwrap();

    // resuming a finished run keeps the calibration
    let again = run_ensemble(
        &snap,
        &RunOptions {
            resume: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(again.calibration, Some(cal));
}

#[test]
fn steps_before_a_run_name_the_missing_step() {
    let dir = TempDir::new().unwrap();
    for result in [
        export_figure(dir.path(), Figure::VHist).map(|_| ()),
        calibrate_aeff_in(dir.path()).map(|_| ()),
        load_records(dir.path()).map(|_| ()),
    ] {
        match result {
            Err(Error::Missing(msg)) => assert!(msg.contains("run"), "{msg}"),
            other => panic!("expected a missing-step error, got {other:?}"),
        }
    }
}

#[test]
fn resume_with_another_config_is_refused() {
    let dir = TempDir::new().unwrap();
    run_ensemble(&snapshot(dir.path(), 0.86, 2, 6.0, 1), &RunOptions::default()).unwrap();
    let err = run_ensemble(
        &snapshot(dir.path(), 0.7, 2, 6.0, 1),
        &RunOptions {
            resume: true,
            ..RunOptions::default()
        },
    )
    .unwrap_err();
    assert!(err.is_config_error(), "{err}");
}

#[test]
fn xi_calibration_flags_the_clean_stack() {
    let spec = DisorderSpec {
        sample_length: 30e-6,
        ..DisorderSpec::standard(0.7)
    };
    let rows = xi_calibrate(&spec, &[0.0, 0.7], 40, 975e-9, 5, Workers::Count(2)).unwrap();
    assert_eq!(rows[0].status(), "no decay");
    assert!(rows[0].xi.is_none());
    assert_eq!(rows[1].status(), "ok");
    let xi = rows[1].xi.unwrap();
    assert!(xi > 5e-6 && xi < 40e-6, "{xi:e}");
    assert!(xi_calibrate(&spec, &[0.7], 40, 975e-9, 5, Workers::Auto).is_err());
}
