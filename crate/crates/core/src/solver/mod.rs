//! Reflection, transmission, Green's function and LDOS of a layered stack at
//! normal incidence.
//!
//! The Green's function is built from the two outgoing solutions, swept in
//! opposite directions with per-layer renormalization. Both sweeps move in the
//! direction in which their solution grows, so the localized regime (where raw
//! transfer-matrix products blow up like `exp(L/ξ)`) stays well conditioned.

pub(crate) mod sweep;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::constants::{omega_from_lambda, C};
use crate::stack::Stack;
use crate::{Error, Result};
use sweep::{relative_ldos, with_sweeper, AnySweeper, State};

/// 2×2 complex matrix, row major.
pub type Matrix2 = [[C64; 2]; 2];

/// Transfer of `(ψ, ψ'/k0)` across a homogeneous slab of complex index `n` and
/// thickness `d` at vacuum wavelength `lambda`. The determinant is one.
pub fn propagation_step(n: C64, d: f64, lambda: f64) -> Result<Matrix2> {
    if !(n.is_finite() && d.is_finite() && lambda.is_finite()) {
        return Err(Error::NumericInstability {
            context: "propagation_step input",
        });
    }
    if d < 0.0 || n.re <= 0.0 || lambda <= 0.0 {
        return Err(Error::validation(
            "propagation step",
            format!("need d >= 0, Re n > 0, lambda > 0 (d = {d}, n = {n}, lambda = {lambda})"),
        ));
    }
    let phi = n * (2.0 * std::f64::consts::PI / lambda * d);
    let (s, c) = (phi.sin(), phi.cos());
    Ok([[c, s / n], [-n * s, c]])
}

pub fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Plane-wave response for incidence from the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterResult {
    pub r: C64,
    pub t: C64,
    #[serde(rename = "R")]
    pub reflectance: f64,
    #[serde(rename = "T")]
    pub transmittance: f64,
    /// `ln T`, accurate even where `T` underflows.
    pub ln_t: f64,
    /// Unwrapped phase of `t`. Continuous in frequency; it rises by π across
    /// each resonance.
    pub phase: f64,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::validation(
            "wavelength",
            format!("must be > 0, got {lambda}"),
        ));
    }
    Ok(())
}

/// Reflection and transmission amplitudes of `stack` at vacuum wavelength `lambda`.
pub fn stack_scattering(stack: &Stack, lambda: f64) -> Result<ScatterResult> {
    check_lambda(lambda)?;
    let mut sweeper = AnySweeper::new(stack);
    let k0 = 2.0 * std::f64::consts::PI / lambda;
    with_sweeper!(&mut sweeper, s => {
        s.set_k0(k0);
        scatter_from(s, lambda)
    })
}

pub(crate) fn scatter_from<T: sweep::Coef>(s: &sweep::Sweeper<T>, lambda: f64) -> Result<ScatterResult> {
    let summary = s.backward(&[], &mut []).ok_or(Error::NumericInstability {
        context: "stack_scattering cascade",
    })?;
    let t = summary.t();
    let r = summary.r();
    let ln_t = summary.ln_t();
    let out = ScatterResult {
        r,
        t,
        reflectance: r.norm_sqr(),
        transmittance: ln_t.exp(),
        ln_t,
        phase: summary.phase,
        lambda,
    };
    if !(out.reflectance.is_finite() && out.ln_t.is_finite() && out.phase.is_finite()) {
        return Err(Error::NumericInstability {
            context: "stack_scattering result",
        });
    }
    Ok(out)
}

/// LDOS at one point and wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdosSample {
    pub z: f64,
    pub lambda: f64,
    /// Electric LDOS per unit length and angular frequency, s/m.
    pub rho_1d: f64,
    /// `rho_1d` relative to the homogeneous embedding medium, `1/(π c n_embed)`.
    pub rho_rel: f64,
}

/// LDOS of a homogeneous medium of index `n`, s/m.
pub fn homogeneous_ldos(n: f64) -> f64 {
    1.0 / (std::f64::consts::PI * C * n)
}

/// Relative LDOS at every `z` for one wavelength, in a single forward and a
/// single backward sweep.
pub fn ldos_line(stack: &Stack, z_grid: &[f64], lambda: f64) -> Result<Vec<LdosSample>> {
    check_lambda(lambda)?;
    let mut sweeper = AnySweeper::new(stack);
    let k0 = 2.0 * std::f64::consts::PI / lambda;
    let rel = with_sweeper!(&mut sweeper, s => {
        s.set_k0(k0);
        relative_ldos_at(s, z_grid)?
    });
    let hom = homogeneous_ldos(stack.n_embed());
    Ok(z_grid
        .iter()
        .zip(rel)
        .map(|(&z, rho_rel)| LdosSample {
            z,
            lambda,
            rho_1d: rho_rel * hom,
            rho_rel,
        })
        .collect())
}

/// Relative LDOS at arbitrary positions for the sweeper's current `k0`.
pub(crate) fn relative_ldos_at<T: sweep::Coef>(s: &sweep::Sweeper<T>, z_grid: &[f64]) -> Result<Vec<f64>> {
    let length = s.total_length();
    let tol = 1e-12 * length.max(1e-9);
    for &z in z_grid {
        if !(z >= -tol && z <= length + tol) {
            return Err(Error::validation(
                "z grid",
                format!("position {z} outside [0, {length}]"),
            ));
        }
    }
    let located: Vec<(usize, f64)> = z_grid.iter().map(|&z| s.locate(z)).collect();
    let mut left_idx: Vec<usize> = located.iter().map(|&(j, _)| j).collect();
    left_idx.sort_unstable();
    left_idx.dedup();
    let right_idx: Vec<usize> = left_idx.iter().map(|&j| j + 1).collect();
    let mut left = vec![
        State {
            u: C64::new(0.0, 0.0),
            v: C64::new(0.0, 0.0)
        };
        left_idx.len()
    ];
    let mut right = left.clone();
    if !s.forward(&left_idx, &mut left) {
        return Err(Error::NumericInstability {
            context: "forward sweep",
        });
    }
    s.backward(&right_idx, &mut right)
        .ok_or(Error::NumericInstability {
            context: "backward sweep",
        })?;
    let n_ref = s.n_embed();
    located
        .iter()
        .map(|&(j, delta)| {
            let k = left_idx.binary_search(&j).expect("recorded layer");
            let d = s.bounds()[j + 1] - s.bounds()[j];
            let l = s.forward_partial(j, left[k], delta);
            let r = s.backward_partial(j, right[k], d - delta);
            relative_ldos(l, r, n_ref).map_err(|w| Error::DegenerateSolutions { wronskian: w })
        })
        .collect()
}

/// LDOS sampled on a `(z, λ)` grid. `values[i][j]` is `rho_rel` at
/// `lambda_grid[i]`, `z_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdosSpectrum {
    pub z_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn check_sorted(what: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation(what, "grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::validation(what, "grid is not sorted"));
    }
    Ok(())
}

pub fn ldos_map(stack: &Stack, z_grid: &[f64], lambda_grid: &[f64]) -> Result<LdosSpectrum> {
    check_sorted("z grid", z_grid)?;
    check_sorted("lambda grid", lambda_grid)?;
    let mut sweeper = AnySweeper::new(stack);
    let mut values = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        check_lambda(lambda)?;
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let row = with_sweeper!(&mut sweeper, s => {
            s.set_k0(k0);
            relative_ldos_at(s, z_grid)?
        });
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInstability { context: "ldos_map" });
        }
        values.push(row);
    }
    Ok(LdosSpectrum {
        z_grid: z_grid.to_vec(),
        lambda_grid: lambda_grid.to_vec(),
        values,
    })
}

/// Localization length estimate from `ln T` samples, using `⟨ln T⟩ = −L/ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub xi: f64,
    pub stderr: f64,
    pub mean_ln_t: f64,
}

pub fn estimate_xi(log_transmissions: &[f64], sample_length: f64) -> Result<XiEstimate> {
    let n = log_transmissions.len();
    if n < 2 {
        return Err(Error::validation("ln T samples", format!("need >= 2, got {n}")));
    }
    if log_transmissions.iter().any(|&x| !(x <= 1e-12)) {
        return Err(Error::validation("ln T samples", "all ln T must be <= 0"));
    }
    let mean = log_transmissions.iter().sum::<f64>() / n as f64;
    if mean >= -1e-12 {
        return Err(Error::NoDecay { mean_ln_t: mean });
    }
    let var = log_transmissions.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_mean = (var / n as f64).sqrt();
    let xi = -sample_length / mean;
    Ok(XiEstimate {
        xi,
        stderr: sample_length / (mean * mean) * se_mean,
        mean_ln_t: mean,
    })
}

/// Angular frequency helper re-exported for callers working in ω.
pub fn omega(lambda: f64) -> f64 {
    omega_from_lambda(lambda)
}
