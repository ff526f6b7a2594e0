//! CSV data products. Numbers are written as `{:.8e}` (nine significant
//! digits) with `\n` line endings so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{coupling_outcomes, mode_volumes, q_eff_samples, store, RealizationRecord, RunConfig, XiRow};
use crate::cqed::strong_coupling_probability;
use crate::solver::ldos_map;
use crate::stack::{generate_stack, predicted_xi};
use crate::stats::{histogram, Binning, Histogram};
use crate::{Error, Result};

/// Histogram bins of the exported distributions (logarithmic).
pub const HISTOGRAM_BINS: usize = 30;
/// Grid of the exported LDOS map.
pub const LDOS_MAP_Z: usize = 101;
pub const LDOS_MAP_LAMBDA: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// LDOS over position and wavelength for realization 0.
    LdosMap,
    /// Mode-volume histogram.
    VHist,
    /// `Q_eff` histogram per loss length.
    QHist,
    /// Strong-coupling probability per loss length.
    ScProb,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::LdosMap, Figure::VHist, Figure::QHist, Figure::ScProb];

    pub fn id(self) -> &'static str {
        match self {
            Figure::LdosMap => "ldos-map",
            Figure::VHist => "v-hist",
            Figure::QHist => "q-hist",
            Figure::ScProb => "sc-prob",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.id() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown figure {s:?}; expected one of ldos-map, v-hist, q-hist, sc-prob"
            ))
        })
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.8e}")
    }
}

fn histogram_table(h: Option<&Histogram>) -> String {
    let mut out = String::from("edge_lo,edge_hi,count,density\n");
    if let Some(h) = h {
        for i in 0..h.counts.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                num(h.edges[i]),
                num(h.edges[i + 1]),
                h.counts[i],
                num(h.density[i])
            );
        }
    }
    out
}

fn log_histogram(samples: &[f64]) -> Result<Option<Histogram>> {
    if samples.is_empty() {
        return Ok(None);
    }
    histogram(
        samples,
        Binning::Log {
            bins: HISTOGRAM_BINS,
            range: None,
        },
    )
    .map(Some)
}

/// File-name tag of a loss length: `lossless` or e.g. `l2.5mm`.
pub fn loss_tag(loss_length: f64) -> String {
    if loss_length.is_infinite() {
        return "lossless".to_string();
    }
    let mm = format!("{:.6}", loss_length * 1e3);
    let mm = mm.trim_end_matches('0').trim_end_matches('.');
    format!("l{mm}mm")
}

/// Tables of `figure` as `(file name, contents)` pairs.
pub fn render_figure(
    figure: Figure,
    cfg: &RunConfig,
    records: &[RealizationRecord],
) -> Result<Vec<(String, String)>> {
    match figure {
        Figure::LdosMap => Ok(vec![("ldos_map.csv".into(), ldos_map_table(cfg)?)]),
        Figure::VHist => {
            let v = mode_volumes(cfg, records)?;
            Ok(vec![(
                "v_hist.csv".into(),
                histogram_table(log_histogram(&v)?.as_ref()),
            )])
        }
        Figure::QHist => cfg
            .loss_models()?
            .iter()
            .map(|loss| {
                let q = q_eff_samples(records, loss);
                let name = format!("q_hist_{}.csv", loss_tag(loss.loss_length));
                Ok((name, histogram_table(log_histogram(&q)?.as_ref())))
            })
            .collect(),
        Figure::ScProb => Ok(vec![("sc_prob.csv".into(), sc_prob_table(cfg, records)?)]),
    }
}

fn ldos_map_table(cfg: &RunConfig) -> Result<String> {
    let spec = &cfg.ensemble;
    let stack = generate_stack(&spec.disorder, cfg.cqed.lambda_c, spec.master_seed, 0)?;
    let length = stack.total_length();
    let z: Vec<f64> = (0..LDOS_MAP_Z)
        .map(|i| length * i as f64 / (LDOS_MAP_Z - 1) as f64)
        .collect();
    let w = spec.lambda_window;
    let lambda: Vec<f64> = (0..LDOS_MAP_LAMBDA)
        .map(|i| w.min + (w.max - w.min) * i as f64 / (LDOS_MAP_LAMBDA - 1) as f64)
        .collect();
    let map = ldos_map(&stack, &z, &lambda)?;
    let mut out = String::from("z_m,lambda_m,rho_rel\n");
    for (j, &zj) in z.iter().enumerate() {
        for (i, &li) in lambda.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", num(zj), num(li), num(map.values[i][j]));
        }
    }
    Ok(out)
}

fn sc_prob_table(cfg: &RunConfig, records: &[RealizationRecord]) -> Result<String> {
    let xi = predicted_xi(cfg.ensemble.disorder.delta_n).unwrap_or(f64::INFINITY);
    let mut out = String::from("xi_m,loss_length_m,p,ci_lo,ci_hi,n\n");
    for loss in cfg.loss_models()? {
        let outcomes = coupling_outcomes(cfg, records, &loss)?;
        if outcomes.is_empty() {
            return Err(Error::Missing(
                "no successful realizations: rerun `run` before exporting sc-prob".into(),
            ));
        }
        let p = strong_coupling_probability(&outcomes)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(xi),
            num(loss.loss_length),
            num(p.p),
            num(p.ci_lo),
            num(p.ci_hi),
            p.n
        );
    }
    Ok(out)
}

/// The localization-length calibration table.
pub fn xi_table(rows: &[XiRow]) -> String {
    let mut out = String::from("delta_n,xi_m,stderr_m,xi_dn2_m,n,status\n");
    let opt = |x: Option<f64>| num(x.unwrap_or(f64::NAN));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.delta_n),
            opt(r.xi),
            opt(r.stderr),
            opt(r.xi_dn2),
            r.realizations,
            r.status()
        );
    }
    out
}

/// Writes every figure's tables into `dir` and returns the file names.
pub(super) fn write_all(dir: &Path, cfg: &RunConfig, records: &[RealizationRecord]) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for fig in Figure::ALL {
        names.extend(write_figure(dir, fig, cfg, records)?);
    }
    Ok(names)
}

fn write_figure(
    dir: &Path,
    figure: Figure,
    cfg: &RunConfig,
    records: &[RealizationRecord],
) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (name, text) in render_figure(figure, cfg, records)? {
        store::write_text(&dir.join(&name), &text)?;
        names.push(name);
    }
    Ok(names)
}

/// Re-exports `figure` from the finished run in `dir` and refreshes the
/// manifest's file index. Uses the calibrated `a_eff` when present.
pub fn export_figure(dir: &Path, figure: Figure) -> Result<Vec<PathBuf>> {
    let mut manifest = store::require_complete(dir, &format!("export {}", figure.id()))?;
    let cfg = manifest.effective_config()?;
    let records = super::load_records(dir)?;
    let names = write_figure(dir, figure, &cfg, &records)?;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    store::index_files(dir, &mut manifest, &refs)?;
    store::write_manifest(dir, &manifest)?;
    Ok(names.iter().map(|n| dir.join(n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_tags() {
        assert_eq!(loss_tag(f64::INFINITY), "lossless");
        assert_eq!(loss_tag(2.5e-3), "l2.5mm");
        assert_eq!(loss_tag(0.7e-3), "l0.7mm");
        assert_eq!(loss_tag(1e-3), "l1mm");
    }

    #[test]
    fn numbers_have_nine_digits() {
        assert_eq!(num(27_800.123_456_789), "2.78001235e4");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn empty_histogram_is_header_only() {
        assert_eq!(histogram_table(None), "edge_lo,edge_hi,count,density\n");
    }

    #[test]
    fn figure_ids_parse() {
        for f in Figure::ALL {
            assert_eq!(f.id().parse::<Figure>().unwrap(), f);
        }
        assert!("fig-5".parse::<Figure>().is_err());
    }
}
