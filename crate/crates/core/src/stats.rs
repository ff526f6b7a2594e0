//! Ensemble statistics: log-normal fits, histograms and bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Maximum-likelihood log-normal parameters of a positive sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalFit {
    /// Mean of `ln Q`.
    pub mu: f64,
    /// Standard deviation of `ln Q` (1/n normalisation).
    pub sigma: f64,
    /// Kolmogorov–Smirnov distance of `ln Q` to `Normal(mu, sigma)`.
    pub ks_statistic: f64,
    pub n: usize,
}

impl LogNormalFit {
    /// Critical KS distance at significance `alpha` ∈ {0.10, 0.05, 0.01}
    /// (Stephens' finite-sample form of the Kolmogorov limit).
    pub fn ks_critical(&self, alpha: f64) -> Result<f64> {
        ks_critical_value(self.n, alpha)
    }

    /// Whether the KS statistic stays below the critical value at `alpha`.
    pub fn passes_ks(&self, alpha: f64) -> Result<bool> {
        Ok(self.ks_statistic < self.ks_critical(alpha)?)
    }

    /// Plain log-normal density of `q`.
    pub fn pdf(&self, q: f64) -> f64 {
        lognormal_pdf(q, self.mu, self.sigma)
    }
}

pub fn ks_critical_value(n: usize, alpha: f64) -> Result<f64> {
    let c = if alpha == 0.10 {
        1.224
    } else if alpha == 0.05 {
        1.358
    } else if alpha == 0.01 {
        1.628
    } else {
        return Err(Error::validation("alpha", format!("unsupported level {alpha}")));
    };
    if n == 0 {
        return Err(Error::validation("ks sample", "empty"));
    }
    let rn = (n as f64).sqrt();
    Ok(c / (rn + 0.12 + 0.11 / rn))
}

pub fn fit_lognormal(samples: &[f64]) -> Result<LogNormalFit> {
    if samples.len() < 20 {
        return Err(Error::validation(
            "log-normal sample",
            format!("need at least 20 samples, got {}", samples.len()),
        ));
    }
    if let Some(bad) = samples.iter().find(|&&q| !(q > 0.0 && q.is_finite())) {
        return Err(Error::validation(
            "log-normal sample",
            format!("all samples must be finite and > 0, found {bad}"),
        ));
    }
    let mut logs: Vec<f64> = samples.iter().map(|q| q.ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
    // rounding in the mean leaves a tiny spread for identical samples
    if !(sigma > 1e-12 * mu.abs().max(1.0)) {
        return Err(Error::DegenerateFit("all samples equal: sigma = 0"));
    }
    let normal = Normal::new(mu, sigma).map_err(|_| Error::DegenerateFit("invalid normal"))?;
    logs.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in logs.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(LogNormalFit {
        mu,
        sigma,
        ks_statistic: d,
        n: samples.len(),
    })
}

/// Log-normal density of `q` with log-mean `mu` and log-deviation `sigma`.
pub fn lognormal_pdf(q: f64, mu: f64, sigma: f64) -> f64 {
    if !(q > 0.0) {
        return 0.0;
    }
    let z = (q.ln() - mu) / sigma;
    (-0.5 * z * z).exp() / (q * sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Density of `Q_eff = Q Q_loss / (Q + Q_loss)` when `Q` is log-normal.
pub fn lognormal_with_loss_pdf(q_eff: f64, fit: &LogNormalFit, q_loss: f64) -> Result<f64> {
    if !(q_eff > 0.0) {
        return Err(Error::validation("q_eff", format!("must be > 0, got {q_eff}")));
    }
    if q_loss.is_infinite() {
        return Ok(fit.pdf(q_eff));
    }
    if q_eff >= q_loss {
        return Err(Error::AboveLossCutoff { q_eff, q_loss });
    }
    let gap = q_loss - q_eff;
    let q = q_eff * q_loss / gap;
    let jacobian = (q_loss / gap).powi(2);
    Ok(fit.pdf(q) * jacobian)
}

/// Bin layout for [`histogram`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Binning {
    /// Equal widths. Without an explicit range the sample extent is used.
    Linear { bins: usize, range: Option<(f64, f64)> },
    /// Equal widths in `ln x`; requires positive samples.
    Log { bins: usize, range: Option<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `counts / (total · width)`, integrates to one over the binned samples.
    pub density: Vec<f64>,
}

/// Deterministic binning. Samples outside an explicit range are dropped;
/// the maximum lands in the last bin.
pub fn histogram(samples: &[f64], binning: Binning) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::validation("histogram", "no samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("histogram", "non-finite sample"));
    }
    let (bins, range, log) = match binning {
        Binning::Linear { bins, range } => (bins, range, false),
        Binning::Log { bins, range } => (bins, range, true),
    };
    if bins == 0 {
        return Err(Error::validation("histogram", "at least one bin"));
    }
    if log && samples.iter().any(|&x| x <= 0.0) {
        return Err(Error::validation("histogram", "log bins need positive samples"));
    }
    let (lo, hi) = match range {
        Some((a, b)) => (a, b),
        None => {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                // a degenerate sample gets a unit-width (or unit-ratio) bin around it
                if log {
                    (lo / 2f64.sqrt(), lo * 2f64.sqrt())
                } else {
                    (lo - 0.5, lo + 0.5)
                }
            } else {
                (lo, hi)
            }
        }
    };
    if !(lo < hi) || (log && lo <= 0.0) {
        return Err(Error::validation(
            "histogram range",
            format!("invalid [{lo}, {hi}]"),
        ));
    }
    let map = |x: f64| if log { x.ln() } else { x };
    let (a, b) = (map(lo), map(hi));
    let edges: Vec<f64> = (0..=bins)
        .map(|i| {
            let t = a + (b - a) * i as f64 / bins as f64;
            if i == bins {
                hi
            } else if i == 0 {
                lo
            } else if log {
                t.exp()
            } else {
                t
            }
        })
        .collect();
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if x < lo || x > hi {
            continue;
        }
        let pos = ((map(x) - a) / (b - a) * bins as f64).floor() as isize;
        let mut i = pos.clamp(0, bins as isize - 1) as usize;
        // guard rounding at the edges
        while i > 0 && x < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && x >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    let total: u64 = counts.iter().sum();
    let density = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if total == 0 {
                0.0
            } else {
                c as f64 / (total as f64 * (edges[i + 1] - edges[i]))
            }
        })
        .collect();
    Ok(Histogram {
        edges,
        counts,
        density,
    })
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    })
}

/// Percentile bootstrap interval of `statistic(a) − statistic(b)` at
/// coverage `level`, resampling each group independently.
pub fn bootstrap_difference(
    a: &[f64],
    b: &[f64],
    statistic: fn(&[f64]) -> f64,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("bootstrap", "both groups need samples"));
    }
    if resamples < 10 || !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(
            "bootstrap",
            "need >= 10 resamples and 0 < level < 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf_a = vec![0.0; a.len()];
    let mut buf_b = vec![0.0; b.len()];
    let mut diffs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for x in buf_a.iter_mut() {
            *x = a[rng.random_range(0..a.len())];
        }
        for x in buf_b.iter_mut() {
            *x = b[rng.random_range(0..b.len())];
        }
        diffs.push(statistic(&buf_a) - statistic(&buf_b));
    }
    diffs.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    let pick = |q: f64| {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        diffs[idx.min(resamples - 1)]
    };
    Ok((pick(tail), pick(1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample_one_bin() {
        let h = histogram(
            &[2.5],
            Binning::Linear {
                bins: 1,
                range: Some((2.0, 4.0)),
            },
        )
        .unwrap();
        assert_eq!(h.counts, vec![1]);
        assert_eq!(h.density, vec![0.5]);
    }

    #[test]
    fn equal_samples_are_degenerate() {
        assert!(matches!(fit_lognormal(&[3.0; 25]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn non_positive_sample_rejected() {
        let mut v = vec![1.0; 30];
        v[3] = 0.0;
        assert!(matches!(fit_lognormal(&v), Err(Error::Validation { .. })));
    }

    #[test]
    fn loss_pdf_above_cutoff_is_an_error() {
        let fit = LogNormalFit {
            mu: 9.0,
            sigma: 1.0,
            ks_statistic: 0.0,
            n: 100,
        };
        assert!(lognormal_with_loss_pdf(3e4, &fit, 2.78e4).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
