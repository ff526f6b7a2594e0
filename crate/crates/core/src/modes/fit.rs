//! Damped Gauss–Newton (Levenberg–Marquardt) fit of a sum of normalized
//! Lorentzians, optionally on a constant baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One term `amplitude · (1/π) · (κ/2) / ((ω − ω_c)² + (κ/2)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub amplitude: f64,
    pub omega: f64,
    pub kappa: f64,
}

impl Lorentzian {
    #[inline]
    pub fn eval(&self, omega: f64) -> f64 {
        let h = 0.5 * self.kappa;
        let x = omega - self.omega;
        self.amplitude / std::f64::consts::PI * h / (x * x + h * h)
    }

    /// Height at the center.
    pub fn peak(&self) -> f64 {
        2.0 * self.amplitude / (std::f64::consts::PI * self.kappa)
    }
}

/// Sum of Lorentzians plus a constant.
pub fn eval_sum(peaks: &[Lorentzian], baseline: f64, omega: f64) -> f64 {
    baseline + peaks.iter().map(|p| p.eval(omega)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when the scaled parameter update falls below this.
    pub tolerance: f64,
    /// Fit a constant baseline in addition to the Lorentzians.
    pub baseline: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            tolerance: 1e-10,
            baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub peaks: Vec<Lorentzian>,
    pub baseline: f64,
    /// RMS of the residual divided by RMS of the data.
    pub residual: f64,
    pub iterations: usize,
    /// The iteration reached a minimum (no further descent possible).
    pub stationary: bool,
    /// Stationary with every parameter in its physical domain.
    pub converged: bool,
}

/// Parameters are scaled so that every unknown is O(1): centers are offsets in
/// units of the initial width, widths are logarithmic, amplitudes relative.
struct Scaling {
    omega0: Vec<f64>,
    kappa0: Vec<f64>,
    amp0: Vec<f64>,
    base0: f64,
}

impl Scaling {
    fn unpack(&self, p: &DVector<f64>, baseline: bool) -> (Vec<Lorentzian>, f64) {
        let peaks = (0..self.omega0.len())
            .map(|i| Lorentzian {
                omega: self.omega0[i] + self.kappa0[i] * p[3 * i],
                kappa: self.kappa0[i] * p[3 * i + 1].exp(),
                amplitude: self.amp0[i] * p[3 * i + 2],
            })
            .collect();
        let base = if baseline {
            self.base0 * p[3 * self.omega0.len()]
        } else {
            0.0
        };
        (peaks, base)
    }
}

fn residuals_and_jacobian(
    x: &[f64],
    y: &[f64],
    y_scale: f64,
    scaling: &Scaling,
    p: &DVector<f64>,
    baseline: bool,
    jac: Option<&mut DMatrix<f64>>,
) -> DVector<f64> {
    let (peaks, base) = scaling.unpack(p, baseline);
    let mut r = DVector::zeros(x.len());
    let inv_pi = 1.0 / std::f64::consts::PI;
    match jac {
        Some(j) => {
            for (k, (&w, &yk)) in x.iter().zip(y).enumerate() {
                let mut model = base;
                for (i, pk) in peaks.iter().enumerate() {
                    let h = 0.5 * pk.kappa;
                    let dx = w - pk.omega;
                    let den = dx * dx + h * h;
                    let shape = inv_pi * h / den;
                    model += pk.amplitude * shape;
                    // ∂/∂ω_c, ∂/∂κ of a·(1/π)·h/(dx²+h²)
                    let d_omega = pk.amplitude * inv_pi * h * 2.0 * dx / (den * den);
                    let d_kappa = pk.amplitude * inv_pi * 0.5 * (dx * dx - h * h) / (den * den);
                    j[(k, 3 * i)] = d_omega * scaling.kappa0[i] / y_scale;
                    j[(k, 3 * i + 1)] = d_kappa * pk.kappa / y_scale;
                    j[(k, 3 * i + 2)] = shape * scaling.amp0[i] / y_scale;
                }
                if baseline {
                    j[(k, 3 * peaks.len())] = scaling.base0 / y_scale;
                }
                r[k] = (model - yk) / y_scale;
            }
        }
        None => {
            for (k, (&w, &yk)) in x.iter().zip(y).enumerate() {
                r[k] = (eval_sum(&peaks, base, w) - yk) / y_scale;
            }
        }
    }
    r
}

/// Fits `initial.len()` Lorentzians (plus an optional baseline) to samples
/// `(x, y)`. Returns a fit with `converged = false` when the iteration limit
/// is hit or a parameter leaves its physical domain.
pub fn fit_lorentzians(
    x: &[f64],
    y: &[f64],
    initial: &[Lorentzian],
    baseline0: f64,
    opts: &FitOptions,
) -> Result<LorentzianFit> {
    if x.len() != y.len() {
        return Err(Error::validation("fit data", "x and y lengths differ"));
    }
    if initial.is_empty() {
        return Ok(LorentzianFit {
            peaks: Vec::new(),
            baseline: 0.0,
            residual: 0.0,
            iterations: 0,
            stationary: true,
            converged: true,
        });
    }
    let n_params = 3 * initial.len() + usize::from(opts.baseline);
    if x.len() < n_params {
        return Err(Error::validation(
            "fit data",
            format!("{} samples for {} parameters", x.len(), n_params),
        ));
    }
    if initial.iter().any(|l| !(l.kappa > 0.0 && l.amplitude != 0.0)) {
        return Err(Error::validation(
            "fit initial guess",
            "kappa must be > 0, amplitude nonzero",
        ));
    }
    let y_scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    if !(y_scale > 0.0 && y_scale.is_finite()) {
        return Err(Error::DegenerateFit("data are identically zero or non-finite"));
    }
    let scaling = Scaling {
        omega0: initial.iter().map(|l| l.omega).collect(),
        kappa0: initial.iter().map(|l| l.kappa).collect(),
        amp0: initial.iter().map(|l| l.amplitude).collect(),
        base0: if baseline0 != 0.0 {
            baseline0.abs()
        } else {
            y_scale
        },
    };
    let mut p = DVector::zeros(n_params);
    for i in 0..initial.len() {
        p[3 * i + 2] = 1.0;
    }
    if opts.baseline {
        p[n_params - 1] = baseline0 / scaling.base0;
    }

    let mut jac = DMatrix::zeros(x.len(), n_params);
    let mut r = residuals_and_jacobian(x, y, y_scale, &scaling, &p, opts.baseline, Some(&mut jac));
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() < 1e-15 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while !accepted {
            let mut a = jtj.clone();
            for d in 0..n_params {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= nu;
                    nu *= 2.0;
                    if mu > 1e30 {
                        break;
                    }
                    continue;
                }
            };
            let p_new = &p + &step;
            let r_new = residuals_and_jacobian(x, y, y_scale, &scaling, &p_new, opts.baseline, None);
            let cost_new = r_new.norm_squared();
            let predicted = step.dot(&(mu * step.component_mul(&jtj.diagonal().map(|v| v.max(1e-12))) - &g));
            let rho = (cost - cost_new) / predicted.max(f64::MIN_POSITIVE);
            let small_step = step.amax() <= opts.tolerance * (1.0 + p.amax());
            if cost_new.is_finite() && cost_new <= cost && rho > 0.0 {
                p = p_new;
                r = residuals_and_jacobian(x, y, y_scale, &scaling, &p, opts.baseline, Some(&mut jac));
                cost = r.norm_squared();
                mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                accepted = true;
            } else {
                mu *= nu;
                nu *= 2.0;
            }
            if small_step {
                converged = true;
                break;
            }
            if mu > 1e30 {
                break;
            }
        }
        if !accepted {
            // a rejected step at maximal damping means no descent direction is left
            converged = true;
        }
        if converged {
            break;
        }
    }

    let (peaks, baseline) = scaling.unpack(&p, opts.baseline);
    let physical = peaks
        .iter()
        .all(|l| l.kappa > 0.0 && l.amplitude > 0.0 && l.omega.is_finite() && l.kappa.is_finite());
    Ok(LorentzianFit {
        residual: (cost / x.len() as f64).sqrt(),
        peaks,
        baseline,
        iterations,
        stationary: converged,
        converged: converged && physical,
    })
}
