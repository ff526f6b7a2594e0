//! Disordered multilayer stacks and their seeded generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Localization length constant of the uniform-index disorder model with
/// 10 nm layers near 975 nm, in meters times (Δn)².
pub const XI_DELTA_N2: f64 = 7.40e-6;

/// One homogeneous layer. `thickness` is in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_real: f64,
    pub n_imag: f64,
    pub thickness: f64,
}

impl Layer {
    pub fn new(n_real: f64, n_imag: f64, thickness: f64) -> Result<Self> {
        if !(n_real > 0.0 && n_real.is_finite()) {
            return Err(Error::validation(
                "layer",
                format!("n_real must be > 0, got {n_real}"),
            ));
        }
        if !(n_imag >= 0.0 && n_imag.is_finite()) {
            return Err(Error::validation(
                "layer",
                format!("n_imag must be >= 0, got {n_imag}"),
            ));
        }
        if !(thickness > 0.0 && thickness.is_finite()) {
            return Err(Error::validation(
                "layer",
                format!("thickness must be > 0, got {thickness}"),
            ));
        }
        Ok(Layer {
            n_real,
            n_imag,
            thickness,
        })
    }

    pub fn lossless(n: f64, thickness: f64) -> Result<Self> {
        Layer::new(n, 0.0, thickness)
    }
}

/// Ordered layers between two semi-infinite media of real index `n_embed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    layers: Vec<Layer>,
    n_embed: f64,
    total_length: f64,
}

impl Stack {
    pub fn new(layers: Vec<Layer>, n_embed: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::validation("stack", "at least one layer is required"));
        }
        if !(n_embed > 0.0 && n_embed.is_finite()) {
            return Err(Error::validation(
                "stack",
                format!("n_embed must be > 0, got {n_embed}"),
            ));
        }
        for layer in &layers {
            Layer::new(layer.n_real, layer.n_imag, layer.thickness)?;
        }
        let total_length = kahan_sum(layers.iter().map(|l| l.thickness));
        Ok(Stack {
            layers,
            n_embed,
            total_length,
        })
    }

    /// A single homogeneous slab of index `n` and thickness `d`.
    pub fn slab(n: f64, d: f64, n_embed: f64) -> Result<Self> {
        Stack::new(vec![Layer::lossless(n, d)?], n_embed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_embed(&self) -> f64 {
        self.n_embed
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn is_lossless(&self) -> bool {
        self.layers.iter().all(|l| l.n_imag == 0.0)
    }

    /// The same layers in reverse order.
    pub fn reversed(&self) -> Stack {
        let mut layers = self.layers.clone();
        layers.reverse();
        Stack {
            layers,
            n_embed: self.n_embed,
            total_length: self.total_length,
        }
    }

    /// Every thickness multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Stack {
        let layers: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                thickness: l.thickness * factor,
                ..*l
            })
            .collect();
        let total_length = kahan_sum(layers.iter().map(|l| l.thickness));
        Stack {
            layers,
            n_embed: self.n_embed,
            total_length,
        }
    }

    /// Copy with layer `j` given a NaN index, bypassing validation. Used to
    /// exercise failure isolation in ensemble runs.
    pub(crate) fn with_poisoned_layer(&self, j: usize) -> Stack {
        let mut out = self.clone();
        if let Some(l) = out.layers.get_mut(j) {
            l.n_real = f64::NAN;
        }
        out
    }

    /// Real index at position `z` (the embedding index outside the stack).
    /// On an interface the layer to the right wins.
    pub fn n_at(&self, z: f64) -> f64 {
        if z < 0.0 || z > self.total_length {
            return self.n_embed;
        }
        let mut acc = 0.0;
        for layer in &self.layers {
            acc += layer.thickness;
            if z < acc {
                return layer.n_real;
            }
        }
        self.layers.last().map_or(self.n_embed, |l| l.n_real)
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Uniform index disorder: each layer draws `n_real` from
/// `[n_mean - delta_n, n_mean + delta_n]`. Lengths are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub n_mean: f64,
    pub delta_n: f64,
    pub layer_thickness: f64,
    pub sample_length: f64,
    pub loss_length: Option<f64>,
}

impl DisorderSpec {
    /// The disorder model used throughout: 10 nm layers, 100 µm sample, n̄ = 3.45.
    pub fn standard(delta_n: f64) -> Self {
        DisorderSpec {
            n_mean: 3.45,
            delta_n,
            layer_thickness: 10e-9,
            sample_length: 100e-6,
            loss_length: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_mean > 0.0 && self.n_mean.is_finite()) {
            return Err(Error::validation("disorder", "n_mean must be > 0"));
        }
        if !(self.delta_n >= 0.0 && self.delta_n < self.n_mean) {
            return Err(Error::validation(
                "disorder",
                format!("need 0 <= delta_n < n_mean, got delta_n = {}", self.delta_n),
            ));
        }
        if !(self.layer_thickness > 0.0 && self.layer_thickness.is_finite()) {
            return Err(Error::validation("disorder", "layer_thickness must be > 0"));
        }
        if !(self.sample_length > 0.0 && self.sample_length.is_finite()) {
            return Err(Error::validation("disorder", "sample_length must be > 0"));
        }
        let ratio = self.sample_length / self.layer_thickness;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::validation(
                "disorder",
                format!("sample_length / layer_thickness = {ratio} is not a positive integer"),
            ));
        }
        if let Some(l) = self.loss_length {
            if !(l > 0.0) {
                return Err(Error::validation(
                    "disorder",
                    format!("loss_length must be > 0, got {l}"),
                ));
            }
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        (self.sample_length / self.layer_thickness).round() as usize
    }

    /// Uniform extinction of every layer for a reference wavelength.
    pub fn n_imag(&self, lambda_ref: f64) -> f64 {
        match self.loss_length {
            Some(l) => lambda_ref / (2.0 * std::f64::consts::PI * l),
            None => 0.0,
        }
    }

    /// A message when the predicted localization length is not below the
    /// sample length (no Anderson localization expected).
    pub fn localization_warning(&self) -> Option<String> {
        match predicted_xi(self.delta_n) {
            Ok(xi) if xi < self.sample_length => None,
            Ok(xi) => Some(format!(
                "predicted localization length {:.3e} m is not below the sample length {:.3e} m",
                xi, self.sample_length
            )),
            Err(_) => Some("delta_n = 0: no localization".to_string()),
        }
    }
}

/// Spectral window in meters of vacuum wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaWindow {
    pub min: f64,
    pub max: f64,
}

impl LambdaWindow {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && min < max && max.is_finite()) {
            return Err(Error::validation(
                "lambda window",
                format!("need 0 < lambda_min < lambda_max, got [{min}, {max}]"),
            ));
        }
        Ok(LambdaWindow { min, max })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.min && lambda <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub disorder: DisorderSpec,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub lambda_window: LambdaWindow,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        self.disorder.validate()?;
        LambdaWindow::new(self.lambda_window.min, self.lambda_window.max)?;
        if self.n_realizations < 1 {
            return Err(Error::validation("ensemble", "n_realizations must be >= 1"));
        }
        Ok(())
    }
}

/// Independent random stream for one realization. ChaCha streams are
/// counter based, so realizations can be drawn in any order.
pub fn realization_rng(master_seed: u64, realization_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(realization_index);
    rng
}

/// Draws one disorder realization. Identical `(master_seed,
/// realization_index)` always produce an identical stack.
pub fn generate_stack(
    spec: &DisorderSpec,
    lambda_ref: f64,
    master_seed: u64,
    realization_index: u64,
) -> Result<Stack> {
    spec.validate()?;
    let n_imag = spec.n_imag(lambda_ref);
    let mut rng = realization_rng(master_seed, realization_index);
    let layers = (0..spec.layer_count())
        .map(|_| {
            let u: f64 = rng.random();
            Layer {
                n_real: spec.n_mean + spec.delta_n * (2.0 * u - 1.0),
                n_imag,
                thickness: spec.layer_thickness,
            }
        })
        .collect();
    Stack::new(layers, spec.n_mean)
}

/// Localization length `7.40 µm / Δn²` of the standard disorder model.
pub fn predicted_xi(delta_n: f64) -> Result<f64> {
    if delta_n == 0.0 {
        return Err(Error::InfiniteLocalizationLength);
    }
    if !(delta_n > 0.0 && delta_n.is_finite()) {
        return Err(Error::validation(
            "delta_n",
            format!("must be > 0, got {delta_n}"),
        ));
    }
    Ok(XI_DELTA_N2 / (delta_n * delta_n))
}

/// Inverse of [`predicted_xi`]: the index half-width giving localization length `xi`.
pub fn delta_n_for_xi(xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::validation(
            "xi",
            format!("must be > 0 and finite, got {xi}"),
        ));
    }
    Ok((XI_DELTA_N2 / xi).sqrt())
}
