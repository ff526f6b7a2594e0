//! Run configuration file. Every physical key carries its unit as a suffix;
//! values are converted to SI on load.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constants::ELEMENTARY_CHARGE;
use crate::cqed::{CqedConfig, EmitterSpec, LossModel, SelectionPolicy};
use crate::modes::{DetectOptions, ExtractionConfig};
use crate::stack::{DisorderSpec, EnsembleSpec, LambdaWindow};
use crate::{Error, Result};

/// Worker threads for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    /// One per available core.
    #[default]
    Auto,
    Count(usize),
}

impl Workers {
    pub fn resolve(self) -> usize {
        match self {
            Workers::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Workers::Count(n) => n.max(1),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.eq_ignore_ascii_case("auto") {
            return Ok(Workers::Auto);
        }
        match text.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Workers::Count(n)),
            _ => Err(Error::Config(format!(
                "workers must be \"auto\" or a positive integer, got {text:?}"
            ))),
        }
    }
}

impl Serialize for Workers {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Workers {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Count(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => Workers::parse(&t).map_err(serde::de::Error::custom),
            Raw::Count(0) => Err(serde::de::Error::custom("workers must be >= 1")),
            Raw::Count(n) => Ok(Workers::Count(n as usize)),
        }
    }
}

/// A loss length in the file: millimetres or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossLength(pub f64);

impl Serialize for LossLength {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0 * 1e3)
        }
    }
}

impl<'de> Deserialize<'de> for LossLength {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t.eq_ignore_ascii_case("inf") => Ok(LossLength(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "loss length must be a number of mm or \"inf\", got {t:?}"
            ))),
            Raw::Number(mm) => Ok(LossLength(mm * 1e-3)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisorder {
    #[serde(default = "default_n_mean")]
    n_mean: f64,
    delta_n: f64,
    #[serde(default = "default_layer_nm")]
    layer_thickness_nm: f64,
    #[serde(default = "default_length_um")]
    sample_length_um: f64,
    /// Direct complex-index simulation; loss is otherwise applied through Q_eff.
    #[serde(default)]
    loss_length_mm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    #[serde(default = "default_realizations")]
    n_realizations: usize,
    master_seed: u64,
    #[serde(default = "default_lambda_min")]
    lambda_min_nm: f64,
    #[serde(default = "default_lambda_max")]
    lambda_max_nm: f64,
    disorder: RawDisorder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCqed {
    a_eff_um2: f64,
    #[serde(default)]
    lambda_c_nm: Option<f64>,
    #[serde(default = "one")]
    transverse_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    #[serde(default = "default_dipole")]
    dipole_e_nm: f64,
    #[serde(default)]
    z_pos_um: Option<f64>,
    #[serde(default)]
    policy: SelectionPolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExtraction {
    #[serde(default = "default_prominence")]
    prominence: f64,
    #[serde(default = "default_center_fraction")]
    center_fraction: f64,
    #[serde(default = "default_residual_bound")]
    residual_bound: f64,
    #[serde(default = "default_probes")]
    probes: usize,
    #[serde(default = "default_coarse_points")]
    coarse_points: usize,
}

impl Default for RawExtraction {
    fn default() -> Self {
        RawExtraction {
            prominence: default_prominence(),
            center_fraction: default_center_fraction(),
            residual_bound: default_residual_bound(),
            probes: default_probes(),
            coarse_points: default_coarse_points(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawXiCalibration {
    delta_n: Vec<f64>,
    #[serde(default = "default_realizations")]
    n_realizations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_output_dir")]
    output_dir: String,
    #[serde(default)]
    workers: Workers,
    #[serde(default = "default_loss_lengths")]
    loss_lengths_mm: Vec<LossLength>,
    #[serde(default = "default_target_v")]
    target_v_lambda_n3: f64,
    ensemble: RawEnsemble,
    cqed: RawCqed,
    #[serde(default)]
    emitter: Option<RawEmitter>,
    #[serde(default)]
    extraction: RawExtraction,
    #[serde(default)]
    xi_calibration: Option<RawXiCalibration>,
}

fn default_n_mean() -> f64 {
    3.45
}
fn default_layer_nm() -> f64 {
    10.0
}
fn default_length_um() -> f64 {
    100.0
}
fn default_realizations() -> usize {
    500
}
fn default_lambda_min() -> f64 {
    970.0
}
fn default_lambda_max() -> f64 {
    980.0
}
fn one() -> f64 {
    1.0
}
fn default_dipole() -> f64 {
    0.64
}
fn default_prominence() -> f64 {
    5.0
}
fn default_center_fraction() -> f64 {
    0.5
}
fn default_residual_bound() -> f64 {
    0.2
}
fn default_probes() -> usize {
    8
}
fn default_coarse_points() -> usize {
    4000
}
fn default_output_dir() -> String {
    "results".to_string()
}
fn default_loss_lengths() -> Vec<LossLength> {
    vec![LossLength(f64::INFINITY)]
}
fn default_target_v() -> f64 {
    2.5
}

/// Mode filtering thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub center_fraction: f64,
    pub residual_bound: f64,
}

/// Transmission-only localization-length calibration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCalibrationConfig {
    pub delta_n: Vec<f64>,
    pub n_realizations: usize,
}

/// Fully resolved run configuration in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ensemble: EnsembleSpec,
    pub cqed: CqedConfig,
    pub emitter: EmitterSpec,
    /// Loss lengths in m; `f64::INFINITY` is the lossless case.
    pub loss_lengths: Vec<f64>,
    pub extraction: ExtractionConfig,
    pub filter: FilterConfig,
    pub output_dir: String,
    pub workers: Workers,
    /// Target of the mode-volume calibration in units of `(λ_c/n̄)³`.
    pub target_v_lambda_n3: f64,
    pub xi_calibration: Option<XiCalibrationConfig>,
}

impl RunConfig {
    /// Parses and validates a configuration file's contents.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = raw.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Validation { what, reason } => Error::Config(format!("{what}: {reason}")),
            other => other,
        };
        self.ensemble.validate().map_err(wrap)?;
        self.cqed.validate().map_err(wrap)?;
        self.emitter
            .validate(self.ensemble.disorder.sample_length)
            .map_err(wrap)?;
        self.extraction.validate().map_err(wrap)?;
        crate::modes::ModeFilter::new(
            self.ensemble.disorder.sample_length,
            self.ensemble.lambda_window,
            self.filter.center_fraction,
            self.filter.residual_bound,
        )
        .map_err(wrap)?;
        if self.loss_lengths.is_empty() {
            return Err(Error::Config(
                "loss_lengths_mm must list at least one value".into(),
            ));
        }
        for &l in &self.loss_lengths {
            if !(l > 0.0) {
                return Err(Error::Config(format!("loss length must be > 0, got {l} m")));
            }
        }
        if !(self.target_v_lambda_n3 > 0.0) {
            return Err(Error::Config("target_v_lambda_n3 must be > 0".into()));
        }
        if let Some(x) = &self.xi_calibration {
            if x.delta_n.len() < 2 {
                return Err(Error::Config(
                    "xi_calibration needs at least 2 delta_n values".into(),
                ));
            }
            if x.n_realizations < 100 {
                return Err(Error::Config(
                    "xi_calibration needs at least 100 realizations per delta_n".into(),
                ));
            }
            if x.delta_n
                .iter()
                .any(|&d| !(d >= 0.0 && d < self.ensemble.disorder.n_mean))
            {
                return Err(Error::Config(
                    "xi_calibration delta_n must lie in [0, n_mean)".into(),
                ));
            }
        }
        if self.output_dir.is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn loss_models(&self) -> Result<Vec<LossModel>> {
        self.loss_lengths
            .iter()
            .map(|&l| LossModel::new(l, self.cqed.lambda_c, self.ensemble.disorder.n_mean))
            .collect()
    }

    /// Calibration target volume in m³.
    pub fn target_v(&self) -> f64 {
        (self.cqed.lambda_c / self.ensemble.disorder.n_mean).powi(3) * self.target_v_lambda_n3
    }
}

/// A configuration together with the exact text it was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSnapshot {
    text: String,
    config: RunConfig,
}

impl ConfigSnapshot {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(ConfigSnapshot {
            text: text.to_string(),
            config: RunConfig::from_toml_str(text)?,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ConfigSnapshot::parse(&text)
    }

    pub fn with_overrides(&self, overrides: &Overrides) -> Result<Self> {
        ConfigSnapshot::parse(&apply_overrides(&self.text, overrides)?)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }
}

/// Command-line values that replace keys of a configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub workers: Option<Workers>,
    /// In m².
    pub a_eff: Option<f64>,
}

/// Rewrites a configuration file's text with `overrides` applied. The
/// result parses to the overridden [`RunConfig`], which makes it usable as
/// a verbatim snapshot.
pub fn apply_overrides(text: &str, overrides: &Overrides) -> Result<String> {
    if *overrides == Overrides::default() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let section = |doc: &mut toml::Table, name: &str| -> Result<toml::Table> {
        match doc.remove(name) {
            Some(toml::Value::Table(t)) => Ok(t),
            None => Ok(toml::Table::new()),
            Some(_) => Err(Error::Config(format!("[{name}] must be a table"))),
        }
    };
    if let Some(seed) = overrides.master_seed {
        let mut ens = section(&mut doc, "ensemble")?;
        let seed = i64::try_from(seed)
            .map_err(|_| Error::Config(format!("seed {seed} does not fit a TOML integer")))?;
        ens.insert("master_seed".into(), toml::Value::Integer(seed));
        doc.insert("ensemble".into(), toml::Value::Table(ens));
    }
    if let Some(w) = overrides.workers {
        let v = match w {
            Workers::Auto => toml::Value::String("auto".into()),
            Workers::Count(n) => toml::Value::Integer(n as i64),
        };
        doc.insert("workers".into(), v);
    }
    if let Some(a) = overrides.a_eff {
        let mut cqed = section(&mut doc, "cqed")?;
        cqed.insert("a_eff_um2".into(), toml::Value::Float(a * 1e12));
        doc.insert("cqed".into(), toml::Value::Table(cqed));
    }
    toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))
}

impl RawConfig {
    fn resolve(self) -> Result<RunConfig> {
        let d = &self.ensemble.disorder;
        let disorder = DisorderSpec {
            n_mean: d.n_mean,
            delta_n: d.delta_n,
            layer_thickness: d.layer_thickness_nm * 1e-9,
            sample_length: d.sample_length_um * 1e-6,
            loss_length: d.loss_length_mm.map(|mm| mm * 1e-3),
        };
        let window = LambdaWindow {
            min: self.ensemble.lambda_min_nm * 1e-9,
            max: self.ensemble.lambda_max_nm * 1e-9,
        };
        let ensemble = EnsembleSpec {
            disorder,
            n_realizations: self.ensemble.n_realizations,
            master_seed: self.ensemble.master_seed,
            lambda_window: window,
        };
        let cqed = CqedConfig {
            a_eff: self.cqed.a_eff_um2 * 1e-12,
            lambda_c: self.cqed.lambda_c_nm.map_or(window.center(), |nm| nm * 1e-9),
            transverse_factor: self.cqed.transverse_factor,
        };
        let raw_emitter = self.emitter.unwrap_or(RawEmitter {
            dipole_e_nm: default_dipole(),
            z_pos_um: None,
            policy: SelectionPolicy::default(),
        });
        let emitter = EmitterSpec {
            dipole: raw_emitter.dipole_e_nm * ELEMENTARY_CHARGE * 1e-9,
            z_pos: raw_emitter
                .z_pos_um
                .map_or(0.5 * disorder.sample_length, |um| um * 1e-6),
            policy: raw_emitter.policy,
        };
        let x = &self.extraction;
        let extraction = ExtractionConfig {
            detect: DetectOptions {
                prominence: x.prominence,
                coarse_points: x.coarse_points,
                ..DetectOptions::default()
            },
            probes: x.probes,
            ..ExtractionConfig::default()
        };
        Ok(RunConfig {
            ensemble,
            cqed,
            emitter,
            loss_lengths: self.loss_lengths_mm.iter().map(|l| l.0).collect(),
            extraction,
            filter: FilterConfig {
                center_fraction: x.center_fraction,
                residual_bound: x.residual_bound,
            },
            output_dir: self.output_dir,
            workers: self.workers,
            target_v_lambda_n3: self.target_v_lambda_n3,
            xi_calibration: self.xi_calibration.map(|x| XiCalibrationConfig {
                delta_n: x.delta_n,
                n_realizations: x.n_realizations,
            }),
        })
    }
}
