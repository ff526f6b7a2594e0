//! Cavity-QED figures of merit of a single quasi-mode: mode volume, Purcell
//! factor, loss-limited Q and the strong-coupling criterion
//! `Q² ρ₀(r) / ω_c > ε₀ħ / (8d²)`.

use serde::{Deserialize, Serialize};

use crate::constants::{omega_from_lambda, C, EPSILON_0, HBAR};
use crate::modes::ResonantMode;
use crate::{Error, Result};

/// Transverse description of the waveguide and the reference wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqedConfig {
    /// Transverse effective area, m².
    pub a_eff: f64,
    /// Reference wavelength, m.
    pub lambda_c: f64,
    /// `|f(x₀, y₀)|²` of the emitter's transverse position, in [0, 1].
    pub transverse_factor: f64,
}

impl CqedConfig {
    pub fn new(a_eff: f64, lambda_c: f64, transverse_factor: f64) -> Result<Self> {
        let cfg = CqedConfig {
            a_eff,
            lambda_c,
            transverse_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_eff > 0.0 && self.a_eff.is_finite()) {
            return Err(Error::validation(
                "a_eff",
                format!("must be > 0, got {}", self.a_eff),
            ));
        }
        if !(self.lambda_c > 0.0 && self.lambda_c.is_finite()) {
            return Err(Error::validation(
                "lambda_c",
                format!("must be > 0, got {}", self.lambda_c),
            ));
        }
        if !(0.0..=1.0).contains(&self.transverse_factor) {
            return Err(Error::validation(
                "transverse_factor",
                format!("must lie in [0, 1], got {}", self.transverse_factor),
            ));
        }
        Ok(())
    }

    /// 3D amplitude `η ρ₀,1D / A_eff` in 1/m³.
    pub fn rho0_3d(&self, rho0_1d: f64) -> f64 {
        self.transverse_factor * rho0_1d / self.a_eff
    }
}

/// Which mode an emitter is tuned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// Closest resonance frequency to the reference wavelength.
    #[default]
    NearestInFrequency,
    /// Largest `Q_eff² ρ₀(z_emitter)`.
    BestCoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    /// Transition dipole moment, C·m.
    pub dipole: f64,
    /// Position along the stack, m.
    pub z_pos: f64,
    pub policy: SelectionPolicy,
}

impl EmitterSpec {
    pub fn validate(&self, sample_length: f64) -> Result<()> {
        if !(self.dipole > 0.0 && self.dipole.is_finite()) {
            return Err(Error::validation(
                "dipole",
                format!("must be > 0, got {}", self.dipole),
            ));
        }
        if !(self.z_pos >= 0.0 && self.z_pos <= sample_length) {
            return Err(Error::validation(
                "emitter z_pos",
                format!("{} outside [0, {}]", self.z_pos, sample_length),
            ));
        }
        Ok(())
    }
}

/// Out-of-plane loss expressed as a loss length and its Q limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Intensity loss length, m; infinite when lossless.
    pub loss_length: f64,
    pub q_loss: f64,
}

impl LossModel {
    pub fn new(loss_length: f64, lambda_c: f64, n_mean: f64) -> Result<Self> {
        Ok(LossModel {
            loss_length,
            q_loss: q_loss(loss_length, lambda_c, n_mean)?,
        })
    }

    pub fn lossless() -> Self {
        LossModel {
            loss_length: f64::INFINITY,
            q_loss: f64::INFINITY,
        }
    }
}

/// `V = A_eff / max_z{n² ρ₀}` from a sampled profile and local indices.
pub fn mode_volume(profile: &[f64], n_profile: &[f64], cfg: &CqedConfig) -> Result<f64> {
    if profile.is_empty() || profile.len() != n_profile.len() {
        return Err(Error::validation(
            "mode profile",
            "non-empty profile with one index per sample required",
        ));
    }
    let peak = profile
        .iter()
        .zip(n_profile)
        .map(|(r, n)| n * n * r)
        .fold(0.0, f64::max);
    volume_from_peak(peak, cfg)
}

/// [`mode_volume`] using the maximum stored with the mode.
pub fn mode_volume_of<M: ResonantMode + ?Sized>(mode: &M, cfg: &CqedConfig) -> Result<f64> {
    volume_from_peak(mode.peak_n2_rho0(), cfg)
}

fn volume_from_peak(peak: f64, cfg: &CqedConfig) -> Result<f64> {
    cfg.validate()?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::DegenerateMode);
    }
    Ok(cfg.a_eff / peak)
}

/// `F = 6π c³ Q ρ₀,3D(z) / (ω_c³ n(z))`.
pub fn purcell_factor<M: ResonantMode + ?Sized>(
    mode: &M,
    z: f64,
    n_at_z: f64,
    q_used: f64,
    cfg: &CqedConfig,
) -> Result<f64> {
    if !(q_used > 0.0) {
        return Err(Error::validation("q_used", format!("must be > 0, got {q_used}")));
    }
    if !(n_at_z > 0.0) {
        return Err(Error::validation("n_at_z", format!("must be > 0, got {n_at_z}")));
    }
    cfg.validate()?;
    let rho0 = mode
        .rho0_at(z)
        .ok_or_else(|| Error::validation("purcell position", format!("z = {z} outside the profile")))?;
    let w = mode.omega_c();
    Ok(6.0 * std::f64::consts::PI * C.powi(3) * q_used * cfg.rho0_3d(rho0) / (w.powi(3) * n_at_z))
}

/// `Q_loss = π n̄ l / λ_c`; an infinite loss length gives an infinite limit.
pub fn q_loss(loss_length: f64, lambda_c: f64, n_mean: f64) -> Result<f64> {
    if !(loss_length > 0.0) {
        return Err(Error::validation(
            "loss_length",
            format!("must be > 0, got {loss_length}"),
        ));
    }
    if !(lambda_c > 0.0 && n_mean > 0.0) {
        return Err(Error::validation(
            "q_loss inputs",
            "lambda_c and n_mean must be > 0",
        ));
    }
    if loss_length.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(std::f64::consts::PI * n_mean * loss_length / lambda_c)
}

/// Harmonic combination `1/Q_eff = 1/Q + 1/Q_loss`.
pub fn effective_q(q: f64, q_loss: f64) -> f64 {
    if q_loss.is_infinite() {
        return q;
    }
    q * q_loss / (q + q_loss)
}

/// `ε₀ħ / (8 d²)` in s/m³.
pub fn coupling_threshold(dipole: f64) -> Result<f64> {
    if !(dipole > 0.0) {
        return Err(Error::validation("dipole", format!("must be > 0, got {dipole}")));
    }
    Ok(EPSILON_0 * HBAR / (8.0 * dipole * dipole))
}

/// Outcome of [`strong_coupling_test`] with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingOutcome {
    pub strong: bool,
    /// `Q_eff² ρ₀,3D / ω_c`, s/m³.
    pub figure: f64,
    pub threshold: f64,
    /// Emitter-mode coupling rate, rad/s.
    pub g: f64,
    /// `ω_c / Q_eff`, rad/s.
    pub kappa_eff: f64,
    pub q_eff: f64,
}

/// Strong-coupling criterion for an emitter at `emitter.z_pos`, using
/// `Q_eff` when a loss model is given.
pub fn strong_coupling_test<M: ResonantMode + ?Sized>(
    mode: &M,
    emitter: &EmitterSpec,
    cfg: &CqedConfig,
    loss: Option<&LossModel>,
) -> Result<CouplingOutcome> {
    let rho0 = mode.rho0_at(emitter.z_pos).ok_or_else(|| {
        Error::validation(
            "emitter position",
            format!("z = {} outside the mode profile", emitter.z_pos),
        )
    })?;
    coupling_from_parts(mode.omega_c(), mode.q_factor(), rho0, emitter.dipole, cfg, loss)
}

/// [`strong_coupling_test`] on raw mode quantities.
pub fn coupling_from_parts(
    omega_c: f64,
    q: f64,
    rho0_1d: f64,
    dipole: f64,
    cfg: &CqedConfig,
    loss: Option<&LossModel>,
) -> Result<CouplingOutcome> {
    let threshold = coupling_threshold(dipole)?;
    let q_eff = match loss {
        Some(l) => effective_q(q, l.q_loss),
        None => q,
    };
    let rho3 = cfg.rho0_3d(rho0_1d.max(0.0));
    let figure = q_eff * q_eff * rho3 / omega_c;
    let g = dipole * (omega_c * rho3 / (2.0 * EPSILON_0 * HBAR)).sqrt();
    Ok(CouplingOutcome {
        strong: figure > threshold,
        figure,
        threshold,
        g,
        kappa_eff: omega_c / q_eff,
        q_eff,
    })
}

/// Mode the emitter is tuned to under `emitter.policy`; `None` for an empty
/// list. Ties go to the earlier mode.
pub fn select_mode<'a, M: ResonantMode>(
    modes: &'a [M],
    emitter: &EmitterSpec,
    cfg: &CqedConfig,
    loss: Option<&LossModel>,
) -> Option<&'a M> {
    let nominal = omega_from_lambda(cfg.lambda_c);
    let score = |m: &M| -> f64 {
        match emitter.policy {
            SelectionPolicy::NearestInFrequency => -(m.omega_c() - nominal).abs(),
            SelectionPolicy::BestCoupled => {
                let q_eff = effective_q(m.q_factor(), loss.map_or(f64::INFINITY, |l| l.q_loss));
                q_eff * q_eff * m.rho0_at(emitter.z_pos).unwrap_or(0.0).max(0.0)
            }
        }
    };
    let mut best: Option<(&M, f64)> = None;
    for m in modes {
        let s = score(m);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((m, s));
        }
    }
    best.map(|(m, _)| m)
}

/// Fraction of realizations whose selected mode couples strongly, with a
/// 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub successes: usize,
    pub n: usize,
}

/// `outcomes[i]` is the verdict for realization `i`; `None` (no mode in
/// the window) counts as a failure.
pub fn strong_coupling_probability(outcomes: &[Option<bool>]) -> Result<Probability> {
    let n = outcomes.len();
    if n == 0 {
        return Err(Error::validation("outcomes", "at least one realization required"));
    }
    let successes = outcomes.iter().filter(|o| **o == Some(true)).count();
    let (ci_lo, ci_hi) = wilson_interval(successes, n, 1.959_963_984_540_054);
    Ok(Probability {
        p: successes as f64 / n as f64,
        ci_lo,
        ci_hi,
        successes,
        n,
    })
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_q_limits() {
        assert_eq!(effective_q(28_000.0, 28_000.0), 14_000.0);
        assert_eq!(effective_q(1234.5, f64::INFINITY), 1234.5);
    }

    #[test]
    fn q_loss_rejects_non_positive_length() {
        assert!(q_loss(0.0, 975e-9, 3.45).is_err());
        assert!(q_loss(f64::INFINITY, 975e-9, 3.45).unwrap().is_infinite());
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (lo, hi) = wilson_interval(55, 100, 1.96);
        assert!(lo < 0.55 && hi > 0.55);
        let (lo, hi) = wilson_interval(0, 50, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn no_mode_counts_as_failure() {
        let p = strong_coupling_probability(&[Some(true), None, Some(false), None]).unwrap();
        assert_eq!(p.p, 0.25);
        assert_eq!(p.n, 4);
    }
}
