//! Seeded ensemble runs: orchestration, persistence, calibration and export.
//!
//! A run directory holds `realizations.jsonl` (one record per realization,
//! in index order), `checkpoint.json` while a run is in progress,
//! `manifest.json` and the exported CSV tables.

mod config;
mod export;
mod store;

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cqed::{
    effective_q, mode_volume_of, select_mode, strong_coupling_probability, strong_coupling_test, LossModel,
    Probability,
};
use crate::modes::{extract_modes, ModeFilter, ResonantMode};
use crate::solver::{estimate_xi, stack_scattering};
use crate::stack::{generate_stack, predicted_xi, DisorderSpec};
use crate::stats::{fit_lognormal, LogNormalFit};
use crate::{Error, Result};

pub use config::{
    apply_overrides, ConfigSnapshot, FilterConfig, LossLength, Overrides, RunConfig, Workers,
    XiCalibrationConfig,
};
pub use export::{export_figure, render_figure, Figure};
pub use store::{load_manifest, load_records, verify_manifest};

pub const RECORDS_FILE: &str = "realizations.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const XI_CALIBRATION_FILE: &str = "xi_calibration.csv";

/// Realizations between checkpoints.
pub const CHECKPOINT_EVERY: usize = 50;

/// Fraction of failed realizations above which a run fails as a whole.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// One extracted mode as persisted. The profile itself is reduced to the
/// values the statistics need: its maximum and its value at the emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub omega_c: f64,
    pub kappa: f64,
    pub z_peak: f64,
    pub n_peak: f64,
    pub peak_n2_rho0: f64,
    pub probe_z: f64,
    pub fit_residual: f64,
    pub overlap_warning: bool,
    /// Passed the localization, window, residual and overlap filters.
    pub retained: bool,
    pub z_emitter: f64,
    pub rho0_emitter: f64,
    pub n_emitter: f64,
}

impl ResonantMode for ModeRecord {
    fn omega_c(&self) -> f64 {
        self.omega_c
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn rho0_at(&self, z: f64) -> Option<f64> {
        (z == self.z_emitter).then_some(self.rho0_emitter)
    }
    fn peak_n2_rho0(&self) -> f64 {
        self.peak_n2_rho0
    }
    fn n_peak(&self) -> f64 {
        self.n_peak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealizationStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub status: RealizationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// `ln T` at the reference wavelength.
    pub ln_t: Option<f64>,
    pub candidates: usize,
    pub fit_failures: usize,
    pub modes: Vec<ModeRecord>,
}

impl RealizationRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RealizationStatus::Ok
    }

    pub fn retained(&self) -> impl Iterator<Item = &ModeRecord> {
        self.modes.iter().filter(|m| m.retained)
    }

    fn failed(index: usize, error: String) -> Self {
        RealizationRecord {
            index,
            status: RealizationStatus::Failed,
            error: Some(error),
            ln_t: None,
            candidates: 0,
            fit_failures: 0,
            modes: Vec::new(),
        }
    }
}

/// Per-realization line of the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationSummary {
    pub index: usize,
    pub status: RealizationStatus,
    pub mode_count: usize,
    pub retained_modes: usize,
    pub ln_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&RealizationRecord> for RealizationSummary {
    fn from(r: &RealizationRecord) -> Self {
        RealizationSummary {
            index: r.index,
            status: r.status,
            mode_count: r.modes.len(),
            retained_modes: r.retained().count(),
            ln_t: r.ln_t,
            error: r.error.clone(),
        }
    }
}

/// Statistics for one loss length. Lengths and cut-offs are `None` in the
/// lossless case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossStatistics {
    pub loss_length_m: Option<f64>,
    pub q_loss: Option<f64>,
    pub q_eff_samples: usize,
    pub q_eff_max: Option<f64>,
    /// Log-normal fit of `Q_eff`; absent below 20 samples.
    pub q_eff_lognormal: Option<LogNormalFit>,
    pub strong_coupling: Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStatistics {
    /// Successful realizations, the denominator of every probability.
    pub realizations: usize,
    pub failed: usize,
    pub modes: usize,
    pub retained_modes: usize,
    /// `7.40 µm / Δn²`; absent without disorder.
    pub xi_nominal_m: Option<f64>,
    pub mean_ln_t: Option<f64>,
    pub a_eff_m2: f64,
    pub min_mode_volume_m3: Option<f64>,
    pub mean_mode_volume_m3: Option<f64>,
    pub per_loss: Vec<LossStatistics>,
}

/// Result of [`calibrate_aeff`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeffCalibration {
    pub a_eff_m2: f64,
    pub target_v_m3: f64,
    pub max_peak_n2_rho0: f64,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsManifest {
    /// Configuration text the run used, overrides included.
    pub config_snapshot: String,
    pub code_version: String,
    pub master_seed: u64,
    pub config_digest: String,
    pub n_realizations: usize,
    pub completed: usize,
    pub realizations: Vec<RealizationSummary>,
    pub statistics: Option<EnsembleStatistics>,
    pub calibration: Option<AeffCalibration>,
    pub files: Vec<FileEntry>,
    pub wall_clock: WallClock,
}

impl ResultsManifest {
    pub fn is_complete(&self) -> bool {
        self.completed == self.n_realizations
    }

    pub fn failed(&self) -> usize {
        self.realizations
            .iter()
            .filter(|r| r.status == RealizationStatus::Failed)
            .count()
    }

    /// The run configuration with a calibrated `a_eff` substituted when
    /// one is recorded.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_toml_str(&self.config_snapshot)?;
        if let Some(c) = &self.calibration {
            cfg.cqed.a_eff = c.a_eff_m2;
        }
        Ok(cfg)
    }
}

/// Execution controls that do not change results.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Continue from `checkpoint.json` instead of starting over.
    pub resume: bool,
    /// Stop once at least this many realizations are checkpointed, leaving
    /// an incomplete run that `resume` can finish.
    pub stop_after: Option<usize>,
    /// Realizations whose stack gets a NaN layer, to exercise failure
    /// handling.
    pub poison: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    config_digest: String,
    completed: usize,
}

/// Everything in a configuration that influences the persisted records.
#[derive(Serialize)]
struct Fingerprint<'a> {
    ensemble: &'a crate::stack::EnsembleSpec,
    extraction: &'a crate::modes::ExtractionConfig,
    filter: &'a FilterConfig,
    z_emitter: f64,
    lambda_c: f64,
}

pub fn config_digest(cfg: &RunConfig) -> Result<String> {
    let fp = Fingerprint {
        ensemble: &cfg.ensemble,
        extraction: &cfg.extraction,
        filter: &cfg.filter,
        z_emitter: cfg.emitter.z_pos,
        lambda_c: cfg.cqed.lambda_c,
    };
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&fp)?)))
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn thread_pool(workers: Workers) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.resolve())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Simulates every realization of `snapshot`, writes the records, the
/// exported tables and the manifest into the configured output directory.
///
/// Records do not depend on the worker count or scheduling. More than 5%
/// failed realizations make the run fail after the manifest is written.
pub fn run_ensemble(snapshot: &ConfigSnapshot, opts: &RunOptions) -> Result<ResultsManifest> {
    let cfg = snapshot.config();
    cfg.validate()?;
    let started = unix_now();
    let clock = Instant::now();
    let dir = PathBuf::from(&cfg.output_dir);
    store::ensure_dir(&dir)?;
    let digest = config_digest(cfg)?;
    let total = cfg.ensemble.n_realizations;

    let calibration = if opts.resume {
        store::load_manifest(&dir)
            .ok()
            .filter(|m| m.config_digest == digest)
            .and_then(|m| m.calibration)
    } else {
        None
    };
    let mut records = if opts.resume {
        store::resume_records(&dir, &digest)?
    } else {
        store::start_fresh(&dir)?;
        Vec::new()
    };
    if records.len() > total {
        records.truncate(total);
    }

    let pool = thread_pool(cfg.workers)?;
    while records.len() < total {
        if opts.stop_after.is_some_and(|k| records.len() >= k) {
            break;
        }
        let start = records.len();
        let stop = (start + CHECKPOINT_EVERY).min(total);
        let chunk: Vec<RealizationRecord> = pool.install(|| {
            (start..stop)
                .into_par_iter()
                .map(|i| run_realization(cfg, i, opts.poison.contains(&i)))
                .collect()
        });
        store::append_records(&dir, &chunk)?;
        records.extend(chunk);
        store::write_checkpoint(
            &dir,
            &Checkpoint {
                config_digest: digest.clone(),
                completed: records.len(),
            },
        )?;
        log::info!("{} / {} realizations done", records.len(), total);
    }

    let complete = records.len() == total;
    let mut manifest = ResultsManifest {
        config_snapshot: snapshot.text().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.ensemble.master_seed,
        config_digest: digest,
        n_realizations: total,
        completed: records.len(),
        realizations: records.iter().map(RealizationSummary::from).collect(),
        statistics: None,
        calibration,
        files: Vec::new(),
        wall_clock: WallClock {
            started_unix_s: started,
            finished_unix_s: started,
            elapsed_s: 0.0,
        },
    };
    store::index_files(&dir, &mut manifest, &[RECORDS_FILE])?;
    if complete {
        let effective = manifest.effective_config()?;
        manifest.statistics = Some(summarize(&effective, &records)?);
        let mut names = export::write_all(&dir, &effective, &records)?;
        if manifest.calibration.is_some() && dir.join(CALIBRATION_FILE).exists() {
            names.push(CALIBRATION_FILE.to_string());
        }
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        store::index_files(&dir, &mut manifest, &names)?;
    }
    let elapsed = clock.elapsed().as_secs_f64();
    manifest.wall_clock.finished_unix_s = started + elapsed;
    manifest.wall_clock.elapsed_s = elapsed;
    store::write_manifest(&dir, &manifest)?;
    if complete {
        store::remove_checkpoint(&dir)?;
    }

    let failed = manifest.failed();
    if complete && failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }
    Ok(manifest)
}

/// One realization, with errors and panics turned into a failed record.
pub fn run_realization(cfg: &RunConfig, index: usize, poison: bool) -> RealizationRecord {
    match panic::catch_unwind(AssertUnwindSafe(|| simulate(cfg, index, poison))) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => RealizationRecord::failed(index, e.to_string()),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            RealizationRecord::failed(index, format!("panic: {msg}"))
        }
    }
}

fn simulate(cfg: &RunConfig, index: usize, poison: bool) -> Result<RealizationRecord> {
    let spec = &cfg.ensemble;
    let mut stack = generate_stack(&spec.disorder, cfg.cqed.lambda_c, spec.master_seed, index as u64)?;
    if poison {
        stack = stack.with_poisoned_layer(stack.layers().len() / 2);
    }
    let ln_t = stack_scattering(&stack, cfg.cqed.lambda_c)?.ln_t;
    if !ln_t.is_finite() {
        return Err(Error::NumericInstability {
            context: "transmission at the reference wavelength",
        });
    }
    let z_e = cfg.emitter.z_pos;
    let outcome = extract_modes(&stack, spec.lambda_window, &cfg.extraction, index as u64, &[z_e])?;
    let filter = ModeFilter::new(
        spec.disorder.sample_length,
        spec.lambda_window,
        cfg.filter.center_fraction,
        cfg.filter.residual_bound,
    )?;
    let n_emitter = stack.n_at(z_e);
    let mut modes = Vec::with_capacity(outcome.modes.len());
    for m in &outcome.modes {
        let rho0_emitter = m.rho0_at(z_e).ok_or(Error::NumericInstability {
            context: "mode profile at the emitter",
        })?;
        let values = [m.omega_c, m.kappa, m.peak_n2_rho0, m.fit_residual, rho0_emitter];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInstability {
                context: "mode parameters",
            });
        }
        modes.push(ModeRecord {
            omega_c: m.omega_c,
            kappa: m.kappa,
            z_peak: m.z_peak,
            n_peak: m.n_peak,
            peak_n2_rho0: m.peak_n2_rho0,
            probe_z: m.probe_z,
            fit_residual: m.fit_residual,
            overlap_warning: m.overlap_warning,
            retained: filter.accepts(m.lambda(), m.z_peak, m.fit_residual, m.overlap_warning),
            z_emitter: z_e,
            rho0_emitter,
            n_emitter,
        });
    }
    Ok(RealizationRecord {
        index,
        status: RealizationStatus::Ok,
        error: None,
        ln_t: Some(ln_t),
        candidates: outcome.candidates,
        fit_failures: outcome.fit_failures,
        modes,
    })
}

/// Mode volumes of all retained modes of successful realizations.
pub fn mode_volumes(cfg: &RunConfig, records: &[RealizationRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .flat_map(|r| r.retained())
        .map(|m| mode_volume_of(m, &cfg.cqed))
        .collect()
}

/// `Q_eff` of all retained modes under `loss`.
pub fn q_eff_samples(records: &[RealizationRecord], loss: &LossModel) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .flat_map(|r| r.retained())
        .map(|m| effective_q(m.q_factor(), loss.q_loss))
        .collect()
}

/// Strong-coupling verdict of the selected mode per successful
/// realization; `None` when no retained mode exists.
pub fn coupling_outcomes(
    cfg: &RunConfig,
    records: &[RealizationRecord],
    loss: &LossModel,
) -> Result<Vec<Option<bool>>> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| {
            let retained: Vec<ModeRecord> = r.retained().cloned().collect();
            match select_mode(&retained, &cfg.emitter, &cfg.cqed, Some(loss)) {
                None => Ok(None),
                Some(m) => Ok(Some(
                    strong_coupling_test(m, &cfg.emitter, &cfg.cqed, Some(loss))?.strong,
                )),
            }
        })
        .collect()
}

fn nominal_xi(d: &DisorderSpec) -> Option<f64> {
    predicted_xi(d.delta_n).ok()
}

/// Reduces records to the manifest statistics in index order.
pub fn summarize(cfg: &RunConfig, records: &[RealizationRecord]) -> Result<EnsembleStatistics> {
    let ok: Vec<&RealizationRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let ln_t: Vec<f64> = ok.iter().filter_map(|r| r.ln_t).collect();
    let volumes = mode_volumes(cfg, records)?;
    let mut per_loss = Vec::with_capacity(cfg.loss_lengths.len());
    for loss in cfg.loss_models()? {
        let q = q_eff_samples(records, &loss);
        let q_eff_lognormal = match fit_lognormal(&q) {
            Ok(f) => Some(f),
            Err(Error::Validation { .. } | Error::DegenerateFit(_)) => None,
            Err(e) => return Err(e),
        };
        let outcomes = coupling_outcomes(cfg, records, &loss)?;
        let strong_coupling = if outcomes.is_empty() {
            Probability {
                p: 0.0,
                ci_lo: 0.0,
                ci_hi: 1.0,
                successes: 0,
                n: 0,
            }
        } else {
            strong_coupling_probability(&outcomes)?
        };
        per_loss.push(LossStatistics {
            loss_length_m: loss.loss_length.is_finite().then_some(loss.loss_length),
            q_loss: loss.q_loss.is_finite().then_some(loss.q_loss),
            q_eff_samples: q.len(),
            q_eff_max: q.iter().copied().reduce(f64::max),
            q_eff_lognormal,
            strong_coupling,
        });
    }
    Ok(EnsembleStatistics {
        realizations: ok.len(),
        failed: records.len() - ok.len(),
        modes: ok.iter().map(|r| r.modes.len()).sum(),
        retained_modes: volumes.len(),
        xi_nominal_m: nominal_xi(&cfg.ensemble.disorder),
        mean_ln_t: (!ln_t.is_empty()).then(|| ln_t.iter().sum::<f64>() / ln_t.len() as f64),
        a_eff_m2: cfg.cqed.a_eff,
        min_mode_volume_m3: volumes.iter().copied().reduce(f64::min),
        mean_mode_volume_m3: (!volumes.is_empty())
            .then(|| volumes.iter().sum::<f64>() / volumes.len() as f64),
        per_loss,
    })
}

/// `a_eff = target_v · max n²ρ₀` over the retained modes, so that the
/// smallest mode volume of the ensemble equals `target_v`.
pub fn calibrate_aeff(records: &[RealizationRecord], target_v: f64) -> Result<AeffCalibration> {
    if !(target_v > 0.0 && target_v.is_finite()) {
        return Err(Error::validation(
            "target_v",
            format!("must be > 0, got {target_v}"),
        ));
    }
    let peaks: Vec<f64> = records
        .iter()
        .filter(|r| r.is_ok())
        .flat_map(|r| r.retained())
        .map(|m| m.peak_n2_rho0)
        .collect();
    let Some(max) = peaks.iter().copied().reduce(f64::max) else {
        return Err(Error::validation("calibration ensemble", "no retained modes"));
    };
    Ok(AeffCalibration {
        a_eff_m2: target_v * max,
        target_v_m3: target_v,
        max_peak_n2_rho0: max,
        modes: peaks.len(),
    })
}

/// Calibrates `a_eff` from a finished run in `dir` against the configured
/// target, records it in the manifest and re-exports the tables that
/// depend on it.
pub fn calibrate_aeff_in(dir: &Path) -> Result<AeffCalibration> {
    let mut manifest = store::require_complete(dir, "calibrate-aeff")?;
    let cfg = RunConfig::from_toml_str(&manifest.config_snapshot)?;
    let records = load_records(dir)?;
    let cal = calibrate_aeff(&records, cfg.target_v())?;
    store::write_json(&dir.join(CALIBRATION_FILE), &cal)?;
    manifest.calibration = Some(cal);
    let effective = manifest.effective_config()?;
    manifest.statistics = Some(summarize(&effective, &records)?);
    let names = export::write_all(dir, &effective, &records)?;
    let mut all: Vec<&str> = names.iter().map(String::as_str).collect();
    all.push(CALIBRATION_FILE);
    store::index_files(dir, &mut manifest, &all)?;
    store::write_manifest(dir, &manifest)?;
    Ok(cal)
}

/// One row of the localization-length calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiRow {
    pub delta_n: f64,
    /// Absent when `⟨ln T⟩` shows no decay.
    pub xi: Option<f64>,
    pub stderr: Option<f64>,
    /// `ξ·Δn²` in m.
    pub xi_dn2: Option<f64>,
    pub realizations: usize,
}

impl XiRow {
    pub fn status(&self) -> &'static str {
        if self.xi.is_some() {
            "ok"
        } else {
            "no decay"
        }
    }
}

/// Transmission-only ensembles at each `delta_n`: `ln T` at the reference
/// wavelength gives `ξ = −L/⟨ln T⟩`. No mode fitting is done.
pub fn xi_calibrate(
    disorder: &DisorderSpec,
    delta_n: &[f64],
    realizations: usize,
    lambda: f64,
    master_seed: u64,
    workers: Workers,
) -> Result<Vec<XiRow>> {
    if delta_n.len() < 2 || realizations < 2 {
        return Err(Error::validation(
            "xi calibration",
            "at least 2 delta_n values and 2 realizations each",
        ));
    }
    let pool = thread_pool(workers)?;
    let mut rows = Vec::with_capacity(delta_n.len());
    for &dn in delta_n {
        let spec = DisorderSpec {
            delta_n: dn,
            loss_length: None,
            ..*disorder
        };
        spec.validate()?;
        let ln_t: Vec<f64> = pool.install(|| {
            (0..realizations)
                .into_par_iter()
                .map(|i| {
                    let stack = generate_stack(&spec, lambda, master_seed, i as u64)?;
                    Ok(stack_scattering(&stack, lambda)?.ln_t)
                })
                .collect::<Result<Vec<f64>>>()
        })?;
        let row = match estimate_xi(&ln_t, spec.sample_length) {
            Ok(est) => XiRow {
                delta_n: dn,
                xi: Some(est.xi),
                stderr: Some(est.stderr),
                xi_dn2: Some(est.xi * dn * dn),
                realizations,
            },
            Err(Error::NoDecay { .. }) => XiRow {
                delta_n: dn,
                xi: None,
                stderr: None,
                xi_dn2: None,
                realizations,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the `[xi_calibration]` section of a configuration and writes
/// `xi_calibration.csv` to its output directory.
pub fn xi_calibrate_config(cfg: &RunConfig) -> Result<Vec<XiRow>> {
    let Some(x) = &cfg.xi_calibration else {
        return Err(Error::Config(
            "no [xi_calibration] section in the configuration".into(),
        ));
    };
    let rows = xi_calibrate(
        &cfg.ensemble.disorder,
        &x.delta_n,
        x.n_realizations,
        cfg.cqed.lambda_c,
        cfg.ensemble.master_seed,
        cfg.workers,
    )?;
    let dir = PathBuf::from(&cfg.output_dir);
    store::ensure_dir(&dir)?;
    store::write_text(&dir.join(XI_CALIBRATION_FILE), &export::xi_table(&rows))?;
    Ok(rows)
}

/// Largest over smallest `ξ·Δn²` among rows that decay.
pub fn xi_spread(rows: &[XiRow]) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| r.xi_dn2).collect();
    let lo = v.iter().copied().reduce(f64::min)?;
    let hi = v.iter().copied().reduce(f64::max)?;
    Some(hi / lo)
}
