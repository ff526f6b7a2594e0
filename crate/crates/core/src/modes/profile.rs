//! Spatial amplitude `ρ₀(z)` of a fitted resonance.

use serde::{Deserialize, Serialize};

use crate::constants::C;
use crate::solver::homogeneous_ldos;
use crate::solver::relative_ldos_at;
use crate::solver::sweep::{with_sweeper, AnySweeper};
use crate::stack::Stack;
use crate::{Error, Result};

/// Offset (in linewidths) of the two off-resonance samples used to estimate
/// the background under a mode.
const BACKGROUND_OFFSET: f64 = 1.0;
/// Background share of the on-resonance LDOS at the peak above which the
/// single-mode picture is flagged.
const OVERLAP_LIMIT: f64 = 0.5;

/// Positional LDOS oracle used by profile extraction.
pub trait LdosSource {
    /// `rho_1d` in s/m at each `z` for angular frequency `omega`.
    fn rho_1d(&mut self, omega: f64, z: &[f64]) -> Result<Vec<f64>>;
    /// Refractive index weighting the energy density at `z`.
    fn index_at(&self, z: f64) -> f64;
}

/// [`LdosSource`] backed by a stack. On an interface the larger of the two
/// adjacent indices is reported.
pub struct StackSource {
    sweeper: AnySweeper,
    hom: f64,
}

impl StackSource {
    pub fn new(stack: &Stack) -> Self {
        StackSource {
            sweeper: AnySweeper::new(stack),
            hom: homogeneous_ldos(stack.n_embed()),
        }
    }

    pub fn bounds(&self) -> &[f64] {
        with_sweeper!(&self.sweeper, s => s.bounds())
    }

    pub fn layer_index(&self, j: usize) -> f64 {
        with_sweeper!(&self.sweeper, s => s.n_real(j))
    }
}

impl LdosSource for StackSource {
    fn rho_1d(&mut self, omega: f64, z: &[f64]) -> Result<Vec<f64>> {
        let hom = self.hom;
        with_sweeper!(&mut self.sweeper, s => {
            s.set_k0(omega / C);
            Ok(relative_ldos_at(s, z)?.into_iter().map(|r| r * hom).collect())
        })
    }

    fn index_at(&self, z: f64) -> f64 {
        with_sweeper!(&self.sweeper, s => {
            let (j, _) = s.locate(z);
            let bounds = s.bounds();
            let mut n = s.n_real(j);
            if j > 0 && bounds[j] == z {
                n = n.max(s.n_real(j - 1));
            }
            if j + 1 < s.layer_count() && bounds[j + 1] == z {
                n = n.max(s.n_real(j + 1));
            }
            n
        })
    }
}

/// `ρ₀(z)` of one mode on a grid with the subtracted background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub z: Vec<f64>,
    /// Mode amplitude in 1/m, clamped to be non-negative.
    pub rho0: Vec<f64>,
    /// Non-resonant LDOS at the mode frequency, s/m.
    pub background: Vec<f64>,
    /// On-resonance LDOS, s/m.
    pub on_resonance: Vec<f64>,
    /// Index used to weight each sample.
    pub index: Vec<f64>,
    pub z_peak: f64,
    pub n_peak: f64,
    pub peak_n2_rho0: f64,
    pub overlap_warning: bool,
}

impl ModeProfile {
    /// Combines two profiles of the same mode sampled on different grids.
    pub fn merge(self, other: ModeProfile) -> ModeProfile {
        let mut rows: Vec<(f64, f64, f64, f64, f64)> = self.rows().chain(other.rows()).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.dedup_by(|a, b| a.0 == b.0);
        let mut z = Vec::with_capacity(rows.len());
        let mut rho0 = Vec::with_capacity(rows.len());
        let mut background = Vec::with_capacity(rows.len());
        let mut on_resonance = Vec::with_capacity(rows.len());
        let mut index = Vec::with_capacity(rows.len());
        for (a, b, c, d, e) in rows {
            z.push(a);
            rho0.push(b);
            background.push(c);
            on_resonance.push(d);
            index.push(e);
        }
        finish(z, rho0, background, on_resonance, index)
    }

    fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64, f64)> + '_ {
        (0..self.z.len()).map(|i| {
            (
                self.z[i],
                self.rho0[i],
                self.background[i],
                self.on_resonance[i],
                self.index[i],
            )
        })
    }
}

fn finish(
    z: Vec<f64>,
    rho0: Vec<f64>,
    background: Vec<f64>,
    on_resonance: Vec<f64>,
    index: Vec<f64>,
) -> ModeProfile {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..z.len() {
        let v = index[i] * index[i] * rho0[i];
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let overlap_warning = background[best] > OVERLAP_LIMIT * on_resonance[best];
    ModeProfile {
        z_peak: z[best],
        n_peak: index[best],
        peak_n2_rho0: best_val,
        overlap_warning,
        z,
        rho0,
        background,
        on_resonance,
        index,
    }
}

/// Lorentzian line shape `(1/π)(κ/2)/(x² + (κ/2)²)`.
fn line(kappa: f64, x: f64) -> f64 {
    let h = 0.5 * kappa;
    h / (std::f64::consts::PI * (x * x + h * h))
}

/// Amplitude of the mode `(omega_c, kappa)` at each `z`.
///
/// The LDOS is sampled at `ω_c` and at `ω_c ± κ`. The mean of the two side
/// samples, corrected for the mode's own tail, is the local background; the
/// remainder at `ω_c` divided by the line height gives `ρ₀`. Negative
/// results (nodes, where only rounding noise remains) are set to zero.
pub fn extract_profile<S: LdosSource + ?Sized>(
    source: &mut S,
    omega_c: f64,
    kappa: f64,
    z_grid: &[f64],
) -> Result<ModeProfile> {
    if !(kappa > 0.0 && kappa.is_finite() && omega_c > kappa) {
        return Err(Error::validation(
            "mode parameters",
            format!("need 0 < kappa < omega_c, got omega_c={omega_c}, kappa={kappa}"),
        ));
    }
    if z_grid.is_empty() {
        return Err(Error::validation("z grid", "empty"));
    }
    if z_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("z grid", "must be strictly increasing"));
    }
    let offset = BACKGROUND_OFFSET * kappa;
    let center = source.rho_1d(omega_c, z_grid)?;
    let above = source.rho_1d(omega_c + offset, z_grid)?;
    let below = source.rho_1d(omega_c - offset, z_grid)?;
    let l0 = line(kappa, 0.0);
    let l1 = line(kappa, offset);
    let mut rho0 = Vec::with_capacity(z_grid.len());
    let mut background = Vec::with_capacity(z_grid.len());
    for i in 0..z_grid.len() {
        let side = 0.5 * (above[i] + below[i]);
        let amp = (center[i] - side) / (l0 - l1);
        let amp = if amp > 0.0 { amp } else { 0.0 };
        rho0.push(amp);
        background.push(side - amp * l1);
    }
    let index = z_grid.iter().map(|&z| source.index_at(z)).collect();
    Ok(finish(z_grid.to_vec(), rho0, background, center, index))
}
