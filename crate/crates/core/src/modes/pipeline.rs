//! Per-realization mode extraction: detect, fit, profile.

use serde::{Deserialize, Serialize};

use super::detect::{detect_in_source, DetectOptions, PeakCandidate, SpectralSource, StackProbes};
use super::fit::{fit_lorentzians, FitOptions, Lorentzian, LorentzianFit};
use super::profile::{extract_profile, ModeProfile, StackSource};
use super::QuasiMode;
use crate::constants::omega_from_lambda;
use crate::stack::{LambdaWindow, Stack};
use crate::{Error, Result};

/// Sampled spectrum over angular frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(omega: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::validation("spectrum", "omega and values lengths differ"));
        }
        Ok(Spectrum { omega, values })
    }

    /// Builds a spectrum from wavelength samples.
    pub fn from_lambda(lambda: &[f64], values: Vec<f64>) -> Result<Self> {
        Spectrum::new(lambda.iter().map(|&l| omega_from_lambda(l)).collect(), values)
    }
}

/// Jointly fits one Lorentzian per candidate to `spectrum`. Candidates
/// supply the starting centers and widths; each needs at least five
/// samples inside its starting FWHM.
pub fn fit_lorentzian_sum(
    spectrum: &Spectrum,
    candidates: &[PeakCandidate],
    opts: &FitOptions,
) -> Result<LorentzianFit> {
    if candidates.is_empty() {
        return Ok(LorentzianFit {
            peaks: Vec::new(),
            baseline: 0.0,
            residual: 0.0,
            iterations: 0,
            stationary: true,
            converged: true,
        });
    }
    for c in candidates {
        let inside = spectrum
            .omega
            .iter()
            .filter(|&&w| (w - c.omega_peak).abs() <= 0.5 * c.fwhm)
            .count();
        if inside < 5 {
            return Err(Error::validation(
                "spectrum sampling",
                format!(
                    "{inside} samples within the linewidth at omega={:.9e}",
                    c.omega_peak
                ),
            ));
        }
    }
    let initial = initial_guess(
        &spectrum.omega,
        &spectrum.values,
        &candidates
            .iter()
            .map(|c| (c.omega_peak, c.fwhm))
            .collect::<Vec<_>>(),
    );
    let base = if opts.baseline {
        min_value(&spectrum.values)
    } else {
        0.0
    };
    fit_lorentzians(&spectrum.omega, &spectrum.values, &initial, base, opts)
}

fn min_value(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Starting Lorentzians from centers/widths: heights are read off the data
/// above its minimum.
fn initial_guess(x: &[f64], y: &[f64], peaks: &[(f64, f64)]) -> Vec<Lorentzian> {
    let floor = min_value(y);
    let heights: Vec<f64> = peaks
        .iter()
        .map(|&(w, _)| {
            let i = nearest(x, w);
            y[i] - floor
        })
        .collect();
    let top = heights.iter().copied().fold(0.0, f64::max);
    peaks
        .iter()
        .zip(heights)
        .map(|(&(omega, kappa), h)| Lorentzian {
            amplitude: h.max(1e-6 * top).max(f64::MIN_POSITIVE) * std::f64::consts::PI * kappa / 2.0,
            omega,
            kappa,
        })
        .collect()
}

fn nearest(x: &[f64], w: f64) -> usize {
    let mut best = 0;
    for (i, &xi) in x.iter().enumerate() {
        if (xi - w).abs() < (x[best] - w).abs() {
            best = i;
        }
    }
    best
}

/// Knobs of the detection/fit/profile pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub detect: DetectOptions,
    /// Equally spaced LDOS probe positions.
    pub probes: usize,
    /// Candidates closer than this many linewidths are fitted together.
    pub joint_linewidths: f64,
    /// Fit samples per linewidth.
    pub samples_per_fwhm: usize,
    /// Half-width of each fit window, in linewidths.
    pub fit_half_width: f64,
    pub fit: FitOptions,
    /// Sub-samples per layer near the profile maximum.
    pub peak_subsamples: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            detect: DetectOptions::default(),
            probes: 8,
            joint_linewidths: 10.0,
            samples_per_fwhm: 10,
            fit_half_width: 2.0,
            fit: FitOptions {
                baseline: true,
                ..FitOptions::default()
            },
            peak_subsamples: 4,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.probes < 1 {
            return Err(Error::validation("extraction.probes", "at least one probe"));
        }
        if !(self.detect.prominence > 0.0) {
            return Err(Error::validation("extraction.prominence", "must be > 0"));
        }
        if self.detect.coarse_points < 3 {
            return Err(Error::validation("extraction.coarse_points", "must be >= 3"));
        }
        if self.samples_per_fwhm < 5 {
            return Err(Error::validation(
                "extraction.samples_per_fwhm",
                "at least 5 samples per linewidth",
            ));
        }
        if !(self.fit_half_width >= 1.0 && self.joint_linewidths >= 0.0) {
            return Err(Error::validation(
                "extraction",
                "fit_half_width >= 1 and joint_linewidths >= 0 required",
            ));
        }
        Ok(())
    }

    pub fn probe_positions(&self, sample_length: f64) -> Vec<f64> {
        (0..self.probes)
            .map(|i| sample_length * (i as f64 + 0.5) / self.probes as f64)
            .collect()
    }
}

/// Result of [`extract_modes`] for one stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub modes: Vec<QuasiMode>,
    pub candidates: usize,
    /// Candidates whose fit did not converge.
    pub fit_failures: usize,
}

/// Finds, fits and profiles every resonance of `stack` inside `window`.
/// The profile grid is every layer boundary plus `z_extra`, refined near
/// each mode's maximum.
pub fn extract_modes(
    stack: &Stack,
    window: LambdaWindow,
    cfg: &ExtractionConfig,
    realization_id: u64,
    z_extra: &[f64],
) -> Result<ExtractionOutcome> {
    cfg.validate()?;
    let length = stack.total_length();
    let mut probes = StackProbes::new(stack, &cfg.probe_positions(length))?;
    let candidates = detect_in_source(&mut probes, window, &cfg.detect)?;

    let mut source = StackSource::new(stack);
    let bounds = source.bounds().to_vec();
    let mut grid = bounds.clone();
    for &z in z_extra {
        if !(0.0..=length).contains(&z) {
            return Err(Error::validation(
                "profile position",
                format!("{z} outside [0, {length}]"),
            ));
        }
        grid.push(z);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut modes = Vec::new();
    let mut fit_failures = 0;
    for group in joint_groups(&candidates, cfg.joint_linewidths) {
        let fitted = fit_group(&mut probes, group, cfg)?;
        for (c, fit) in group.iter().zip(fitted) {
            let Some((peak, residual)) = fit else {
                fit_failures += 1;
                continue;
            };
            if !(peak.kappa > 0.0 && peak.omega > peak.kappa) {
                fit_failures += 1;
                continue;
            }
            let coarse = extract_profile(&mut source, peak.omega, peak.kappa, &grid)?;
            let fine = refine_grid(&bounds, coarse.z_peak, cfg.peak_subsamples);
            let profile = if fine.is_empty() {
                coarse
            } else {
                coarse.merge(extract_profile(&mut source, peak.omega, peak.kappa, &fine)?)
            };
            modes.push(to_mode(peak, residual, c.probe_z, profile, realization_id));
        }
    }
    Ok(ExtractionOutcome {
        modes,
        candidates: candidates.len(),
        fit_failures,
    })
}

fn to_mode(peak: Lorentzian, residual: f64, probe_z: f64, p: ModeProfile, realization_id: u64) -> QuasiMode {
    QuasiMode {
        omega_c: peak.omega,
        kappa: peak.kappa,
        z_grid: p.z,
        profile: p.rho0,
        z_peak: p.z_peak,
        n_peak: p.n_peak,
        peak_n2_rho0: p.peak_n2_rho0,
        probe_z,
        fit_residual: residual,
        overlap_warning: p.overlap_warning,
        realization_id,
    }
}

/// Interior sample points in the layers around `z_peak`.
fn refine_grid(bounds: &[f64], z_peak: f64, per_layer: usize) -> Vec<f64> {
    if per_layer == 0 || bounds.len() < 2 {
        return Vec::new();
    }
    let layers = bounds.len() - 1;
    let b = bounds.partition_point(|&x| x < z_peak).min(layers);
    let first = b.saturating_sub(2);
    let last = (b + 1).min(layers - 1);
    let mut out = Vec::new();
    for j in first..=last {
        let (z0, z1) = (bounds[j], bounds[j + 1]);
        for i in 0..per_layer {
            let z = z0 + (z1 - z0) * (2 * i + 1) as f64 / (2 * per_layer) as f64;
            if z > z0 && z < z1 {
                out.push(z);
            }
        }
    }
    out
}

/// Splits frequency-sorted candidates into runs closer than
/// `linewidths` times the larger width.
fn joint_groups(candidates: &[PeakCandidate], linewidths: f64) -> Vec<&[PeakCandidate]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=candidates.len() {
        let split = i == candidates.len() || {
            let (a, b) = (&candidates[i - 1], &candidates[i]);
            (b.omega_peak - a.omega_peak) >= linewidths * a.fwhm.max(b.fwhm)
        };
        if split {
            out.push(&candidates[start..i]);
            start = i;
        }
    }
    out
}

/// Fits the Lorentzians of `members` to one probe's samples; `None` unless
/// the fit reaches a minimum.
fn fit_members<'a>(
    omega: &[f64],
    y: &[f64],
    group: &[PeakCandidate],
    members: &'a [usize],
    cfg: &ExtractionConfig,
) -> Result<Option<(&'a [usize], LorentzianFit)>> {
    let starts: Vec<(f64, f64)> = members
        .iter()
        .map(|&i| (group[i].omega_peak, group[i].fwhm))
        .collect();
    let initial = initial_guess(omega, y, &starts);
    let base = if cfg.fit.baseline { min_value(y) } else { 0.0 };
    match fit_lorentzians(omega, y, &initial, base, &cfg.fit) {
        Ok(f) if f.stationary => Ok(Some((members, f))),
        Ok(_) | Err(Error::DegenerateFit(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fits a group on a shared adaptive grid. Each member's parameters come
/// from the fit of the LDOS at its own probe.
fn fit_group<S: SpectralSource + ?Sized>(
    source: &mut S,
    group: &[PeakCandidate],
    cfg: &ExtractionConfig,
) -> Result<Vec<Option<(Lorentzian, f64)>>> {
    let per_side = (cfg.fit_half_width * cfg.samples_per_fwhm as f64).ceil() as usize;
    let mut omega = Vec::with_capacity(group.len() * (2 * per_side + 1));
    for c in group {
        let spacing = c.fwhm / cfg.samples_per_fwhm as f64;
        for i in 0..=2 * per_side {
            omega.push(c.omega_peak + spacing * (i as f64 - per_side as f64));
        }
    }
    omega.sort_by(f64::total_cmp);
    omega.dedup();

    let n_probes = source.probe_positions().len();
    let mut data = vec![Vec::with_capacity(omega.len()); n_probes];
    let mut rho = vec![0.0; n_probes];
    for &w in &omega {
        source.eval(w, &mut rho)?;
        for (col, &r) in data.iter_mut().zip(&rho) {
            col.push(r);
        }
    }

    let mut out = vec![None; group.len()];
    let mut probes: Vec<usize> = group.iter().map(|c| c.probe).collect();
    probes.sort_unstable();
    probes.dedup();
    for p in probes {
        let y = &data[p];
        let all: Vec<usize> = (0..group.len()).collect();
        let own: Vec<usize> = all.iter().copied().filter(|&i| group[i].probe == p).collect();
        // Members located elsewhere can be invisible at this probe and keep the
        // joint fit from settling; those are then dropped from the model.
        let mut fitted = fit_members(&omega, y, group, &all, cfg)?;
        if fitted.is_none() && own.len() < all.len() {
            fitted = fit_members(&omega, y, group, &own, cfg)?;
        }
        let Some((members, fit)) = fitted else {
            continue;
        };
        for (k, &i) in members.iter().enumerate() {
            let peak = fit.peaks[k];
            if group[i].probe == p && peak.amplitude > 0.0 && peak.kappa > 0.0 && peak.omega > peak.kappa {
                out[i] = Some((peak, fit.residual));
            }
        }
    }
    Ok(out)
}
