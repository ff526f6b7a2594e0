//! Quasi-mode extraction: locate resonances in the LDOS of a stack, fit them
//! with normalized Lorentzians and recover each mode's amplitude profile.
//!
//! Detection runs a coarse frequency scan of the LDOS at a few probe
//! positions, of `ln T`, and of the unwrapped transmission phase. The phase
//! rises by π across every resonance, so modes far narrower than the coarse
//! spacing still show up as a jump between two neighbouring samples.

mod detect;
pub mod fit;
mod pipeline;
mod profile;

use serde::{Deserialize, Serialize};

use crate::constants::lambda_from_omega;
use crate::stack::LambdaWindow;

pub use detect::{
    detect_in_source, detect_peaks, prominent_maxima, CoarseScan, DetectOptions, PeakCandidate,
    SpectralSource,
};
pub use fit::{eval_sum, fit_lorentzians, FitOptions, Lorentzian, LorentzianFit};
pub use pipeline::{extract_modes, fit_lorentzian_sum, ExtractionConfig, ExtractionOutcome, Spectrum};
pub use profile::{extract_profile, LdosSource, ModeProfile, StackSource};

/// Read access shared by full modes and their persisted summaries.
pub trait ResonantMode {
    /// Resonance angular frequency, rad/s.
    fn omega_c(&self) -> f64;
    /// Energy decay rate (FWHM in ω), rad/s.
    fn kappa(&self) -> f64;
    /// 1D amplitude `ρ₀(z)` in 1/m, if known at `z`.
    fn rho0_at(&self, z: f64) -> Option<f64>;
    /// `max_z n²(z) ρ₀(z)`, 1/m.
    fn peak_n2_rho0(&self) -> f64;
    /// Local index at the position of that maximum.
    fn n_peak(&self) -> f64;

    fn q_factor(&self) -> f64 {
        self.omega_c() / self.kappa()
    }

    fn lambda(&self) -> f64 {
        lambda_from_omega(self.omega_c())
    }
}

/// One Anderson-localized resonance of a realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMode {
    pub omega_c: f64,
    pub kappa: f64,
    pub z_grid: Vec<f64>,
    /// `ρ₀(z)` on `z_grid`, 1/m, non-negative.
    pub profile: Vec<f64>,
    pub z_peak: f64,
    pub n_peak: f64,
    pub peak_n2_rho0: f64,
    /// Probe position whose LDOS spectrum was fitted.
    pub probe_z: f64,
    pub fit_residual: f64,
    pub overlap_warning: bool,
    pub realization_id: u64,
}

impl ResonantMode for QuasiMode {
    fn omega_c(&self) -> f64 {
        self.omega_c
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn rho0_at(&self, z: f64) -> Option<f64> {
        interpolate(&self.z_grid, &self.profile, z)
    }
    fn peak_n2_rho0(&self) -> f64 {
        self.peak_n2_rho0
    }
    fn n_peak(&self) -> f64 {
        self.n_peak
    }
}

/// Linear interpolation on a sorted grid; exact at grid points.
pub(crate) fn interpolate(grid: &[f64], values: &[f64], z: f64) -> Option<f64> {
    if grid.is_empty() || z < grid[0] || z > grid[grid.len() - 1] {
        return None;
    }
    let i = grid.partition_point(|&g| g < z);
    if i < grid.len() && grid[i] == z {
        return Some(values[i]);
    }
    let (z0, z1) = (grid[i - 1], grid[i]);
    let t = (z - z0) / (z1 - z0);
    Some(values[i - 1] * (1.0 - t) + values[i] * t)
}

/// Keeps modes localized in the central `center_fraction` of the sample,
/// resonant inside `window`, with a fit residual below `residual_bound` and
/// no overlap warning.
pub fn filter_modes(
    modes: &[QuasiMode],
    sample_length: f64,
    window: LambdaWindow,
    center_fraction: f64,
    residual_bound: f64,
) -> crate::Result<Vec<QuasiMode>> {
    let criteria = ModeFilter::new(sample_length, window, center_fraction, residual_bound)?;
    Ok(modes
        .iter()
        .filter(|m| criteria.accepts(m.lambda(), m.z_peak, m.fit_residual, m.overlap_warning))
        .cloned()
        .collect())
}

/// Retention rule applied by [`filter_modes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFilter {
    z_lo: f64,
    z_hi: f64,
    window: LambdaWindow,
    residual_bound: f64,
}

impl ModeFilter {
    pub fn new(
        sample_length: f64,
        window: LambdaWindow,
        center_fraction: f64,
        residual_bound: f64,
    ) -> crate::Result<Self> {
        if !(center_fraction > 0.0 && center_fraction <= 1.0) {
            return Err(crate::Error::validation(
                "center_fraction",
                format!("must be in (0, 1], got {center_fraction}"),
            ));
        }
        Ok(ModeFilter {
            z_lo: 0.5 * (1.0 - center_fraction) * sample_length,
            z_hi: 0.5 * (1.0 + center_fraction) * sample_length,
            window,
            residual_bound,
        })
    }

    pub fn accepts(&self, lambda: f64, z_peak: f64, fit_residual: f64, overlap: bool) -> bool {
        z_peak >= self.z_lo
            && z_peak <= self.z_hi
            && self.window.contains(lambda)
            && fit_residual < self.residual_bound
            && !overlap
    }
}
