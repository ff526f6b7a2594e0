//! Two-stage resonance search: coarse uniform-frequency scan, then local
//! refinement of every candidate.

use serde::{Deserialize, Serialize};

use crate::constants::{lambda_from_omega, omega_from_lambda, C};
use crate::solver::sweep::{relative_ldos, with_sweeper, AnySweeper, Coef, LaneSweeper, State, Sweeper};
use crate::stack::{LambdaWindow, Stack};
use crate::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Steps between exact coefficient resyncs during a coarse scan.
const RESYNC_EVERY: usize = 64;
/// Frequencies swept together during a coarse scan of a lossless stack.
const LANES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    /// Minimum peak prominence in `rho_rel` units.
    pub prominence: f64,
    /// Points of the coarse uniform-frequency scan.
    pub coarse_points: usize,
    /// Relative bracket width at which the peak search stops.
    pub precision: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            prominence: 5.0,
            coarse_points: 4000,
            precision: 1e-9,
        }
    }
}

/// A located resonance prior to fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakCandidate {
    pub lambda_peak: f64,
    pub omega_peak: f64,
    pub probe_z: f64,
    /// Index of the probe in the source's probe list.
    pub probe: usize,
    pub prominence: f64,
    /// Linewidth estimate (FWHM in ω) from the phase quarter points.
    pub fwhm: f64,
}

/// Anything that can report the relative LDOS at a fixed set of probe
/// positions, `ln T` and the unwrapped transmission phase at a frequency.
pub trait SpectralSource {
    fn probe_positions(&self) -> &[f64];

    /// Writes `rho_rel` per probe to `rho` and returns `(ln T, phase)`.
    fn eval(&mut self, omega: f64, rho: &mut [f64]) -> Result<(f64, f64)>;

    /// Samples `count` uniformly spaced frequencies starting at `omega0`.
    fn scan(&mut self, omega0: f64, step: f64, count: usize) -> Result<CoarseScan> {
        let probes = self.probe_positions().len();
        let mut out = CoarseScan::new(probes, count);
        let mut rho = vec![0.0; probes];
        for k in 0..count {
            let w = omega0 + step * k as f64;
            let (ln_t, phase) = self.eval(w, &mut rho)?;
            out.push(w, &rho, ln_t, phase);
        }
        Ok(out)
    }
}

/// Coarse scan samples, `rho[p][k]` per probe `p`.
#[derive(Debug, Clone)]
pub struct CoarseScan {
    pub omega: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub ln_t: Vec<f64>,
    pub phase: Vec<f64>,
}

impl CoarseScan {
    fn new(probes: usize, count: usize) -> Self {
        CoarseScan {
            omega: Vec::with_capacity(count),
            rho: vec![Vec::with_capacity(count); probes],
            ln_t: Vec::with_capacity(count),
            phase: Vec::with_capacity(count),
        }
    }

    fn push(&mut self, omega: f64, rho: &[f64], ln_t: f64, phase: f64) {
        self.omega.push(omega);
        for (col, &r) in self.rho.iter_mut().zip(rho) {
            col.push(r);
        }
        self.ln_t.push(ln_t);
        self.phase.push(phase);
    }
}

/// LDOS probes at layer boundaries of a stack.
pub(crate) struct StackProbes {
    sweeper: AnySweeper,
    positions: Vec<f64>,
    /// Probe boundary indices in ascending order, and the probe slot of each.
    record: Vec<usize>,
    order: Vec<usize>,
    left: Vec<State>,
    right: Vec<State>,
}

impl StackProbes {
    /// Snaps each requested position to its nearest layer boundary.
    pub fn new(stack: &Stack, positions: &[f64]) -> Result<Self> {
        let sweeper = AnySweeper::new(stack);
        let length = stack.total_length();
        if positions.is_empty() {
            return Err(Error::validation(
                "probe positions",
                "at least one probe required",
            ));
        }
        let boundaries: Vec<usize> = positions
            .iter()
            .map(|&z| {
                if !(0.0..=length).contains(&z) {
                    return Err(Error::validation(
                        "probe positions",
                        format!("{z} outside [0, {length}]"),
                    ));
                }
                Ok(with_sweeper!(&sweeper, s => s.nearest_boundary(z)))
            })
            .collect::<Result<_>>()?;
        let snapped: Vec<f64> = with_sweeper!(&sweeper, s => {
            boundaries.iter().map(|&b| s.bounds()[b]).collect()
        });
        let mut order: Vec<usize> = (0..boundaries.len()).collect();
        order.sort_by_key(|&i| boundaries[i]);
        let record: Vec<usize> = order.iter().map(|&i| boundaries[i]).collect();
        let blank = State {
            u: Default::default(),
            v: Default::default(),
        };
        Ok(StackProbes {
            sweeper,
            positions: snapped,
            left: vec![blank; record.len()],
            right: vec![blank; record.len()],
            record,
            order,
        })
    }

    fn sample_current(&mut self, rho: &mut [f64]) -> Result<(f64, f64)> {
        let StackProbes {
            sweeper,
            record,
            order,
            left,
            right,
            ..
        } = self;
        with_sweeper!(sweeper, s => sample_sweeper(s, record, order, left, right, rho))
    }
}

fn sample_sweeper<T: Coef>(
    s: &Sweeper<T>,
    record: &[usize],
    order: &[usize],
    left: &mut [State],
    right: &mut [State],
    rho: &mut [f64],
) -> Result<(f64, f64)> {
    if !s.forward(record, left) {
        return Err(Error::NumericInstability {
            context: "forward sweep",
        });
    }
    let summary = s.backward(record, right).ok_or(Error::NumericInstability {
        context: "backward sweep",
    })?;
    let n_ref = s.n_embed();
    for (slot, &p) in order.iter().enumerate() {
        rho[p] = relative_ldos(left[slot], right[slot], n_ref)
            .map_err(|w| Error::DegenerateSolutions { wronskian: w })?;
    }
    Ok((summary.ln_t(), summary.phase))
}

impl SpectralSource for StackProbes {
    fn probe_positions(&self) -> &[f64] {
        &self.positions
    }

    fn eval(&mut self, omega: f64, rho: &mut [f64]) -> Result<(f64, f64)> {
        let k0 = omega / C;
        with_sweeper!(&mut self.sweeper, s => s.set_k0(k0));
        self.sample_current(rho)
    }

    fn scan(&mut self, omega0: f64, step: f64, count: usize) -> Result<CoarseScan> {
        let k_max = (omega0 + step * count as f64) / C;
        if let AnySweeper::Real(base) = &self.sweeper {
            // lanes count windings per layer chord, valid for thin layers only
            if !base.has_thick_layers(k_max) {
                return scan_lanes(base, &self.record, &self.order, omega0, step, count);
            }
        }
        let probes = self.positions.len();
        let mut out = CoarseScan::new(probes, count);
        let mut rho = vec![0.0; probes];
        with_sweeper!(&mut self.sweeper, s => s.prepare_steps(step / C));
        for k in 0..count {
            let w = omega0 + step * k as f64;
            if k % RESYNC_EVERY == 0 {
                with_sweeper!(&mut self.sweeper, s => s.set_k0(w / C));
            } else {
                with_sweeper!(&mut self.sweeper, s => s.step_k0());
            }
            let (ln_t, phase) = self.sample_current(&mut rho)?;
            out.push(w, &rho, ln_t, phase);
        }
        Ok(out)
    }
}

/// Coarse scan of a lossless stack, several frequencies per sweep.
fn scan_lanes(
    base: &Sweeper<f64>,
    record: &[usize],
    order: &[usize],
    omega0: f64,
    step: f64,
    count: usize,
) -> Result<CoarseScan> {
    const K: usize = LANES;
    let mut lanes: LaneSweeper<K> = LaneSweeper::new(base);
    let blank = State {
        u: Default::default(),
        v: Default::default(),
    };
    let mut left = vec![[blank; K]; record.len()];
    let mut right = vec![[blank; K]; record.len()];
    let mut out = CoarseScan::new(order.len(), count);
    let mut rho = vec![0.0; order.len()];
    let n_ref = base.n_embed();
    let mut first = 0;
    while first < count {
        let w0 = omega0 + step * first as f64;
        if first % RESYNC_EVERY == 0 {
            lanes.set(w0 / C, step / C);
        } else {
            lanes.advance();
        }
        if !lanes.forward(record, &mut left) {
            return Err(Error::NumericInstability {
                context: "forward sweep",
            });
        }
        let sums = lanes
            .backward(record, &mut right)
            .ok_or(Error::NumericInstability {
                context: "backward sweep",
            })?;
        for i in 0..K.min(count - first) {
            for (slot, &p) in order.iter().enumerate() {
                rho[p] = relative_ldos(left[slot][i], right[slot][i], n_ref)
                    .map_err(|w| Error::DegenerateSolutions { wronskian: w })?;
            }
            let w = omega0 + step * (first + i) as f64;
            out.push(w, &rho, sums[i].ln_t(), sums[i].phase);
        }
        first += K;
    }
    Ok(out)
}

/// Local maxima of `y` with topographic prominence at least `threshold`,
/// as `(index, prominence)`.
pub fn prominent_maxima(y: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut k = 1;
    while k + 1 < n {
        if !(y[k] > y[k - 1]) {
            k += 1;
            continue;
        }
        // plateau handling: advance across equal values
        let mut end = k;
        while end + 1 < n && y[end + 1] == y[k] {
            end += 1;
        }
        if end + 1 < n && y[end + 1] < y[k] {
            let peak = y[k];
            let mut left_min = peak;
            let mut i = k;
            while i > 0 {
                i -= 1;
                if y[i] > peak {
                    break;
                }
                left_min = left_min.min(y[i]);
            }
            let mut right_min = peak;
            let mut i = end;
            while i + 1 < n {
                i += 1;
                if y[i] > peak {
                    break;
                }
                right_min = right_min.min(y[i]);
            }
            let prominence = peak - left_min.max(right_min);
            if prominence >= threshold {
                out.push(((k + end) / 2, prominence));
            }
        }
        k = end + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Seed {
    /// Phase jump of more than π/2 between samples `k` and `k + 1`.
    Step {
        k: usize,
        jump: f64,
    },
    Ldos {
        k: usize,
        probe: usize,
        height: f64,
    },
    Transmission {
        k: usize,
    },
}

impl Seed {
    /// Position on the coarse grid in half-steps.
    fn half_index(&self) -> usize {
        match *self {
            Seed::Step { k, .. } => 2 * k + 1,
            Seed::Ldos { k, .. } | Seed::Transmission { k } => 2 * k,
        }
    }
}

/// Locates resonances of `stack` inside `window` from the LDOS at
/// `probe_positions` (snapped to the nearest layer boundaries), `ln T` and
/// the transmission phase.
pub fn detect_peaks(
    stack: &Stack,
    window: LambdaWindow,
    probe_positions: &[f64],
    opts: &DetectOptions,
) -> Result<Vec<PeakCandidate>> {
    let mut probes = StackProbes::new(stack, probe_positions)?;
    detect_in_source(&mut probes, window, opts)
}

/// [`detect_peaks`] on any spectral source.
pub fn detect_in_source<S: SpectralSource + ?Sized>(
    source: &mut S,
    window: LambdaWindow,
    opts: &DetectOptions,
) -> Result<Vec<PeakCandidate>> {
    if opts.coarse_points < 3 {
        return Err(Error::validation("coarse_points", "need at least 3"));
    }
    if !(opts.prominence > 0.0) {
        return Err(Error::validation("prominence", "must be > 0"));
    }
    let omega_lo = omega_from_lambda(window.max);
    let omega_hi = omega_from_lambda(window.min);
    let step = (omega_hi - omega_lo) / (opts.coarse_points - 1) as f64;
    let scan = source.scan(omega_lo, step, opts.coarse_points)?;
    let mut refiner = Refiner {
        source,
        rho: vec![0.0; scan.rho.len()],
        step,
        precision: opts.precision,
    };

    let mut seeds = Vec::new();
    for k in 0..scan.omega.len() - 1 {
        let jump = scan.phase[k + 1] - scan.phase[k];
        if jump > 0.5 * std::f64::consts::PI {
            seeds.push(Seed::Step { k, jump });
        }
    }
    for (p, series) in scan.rho.iter().enumerate() {
        for (k, _) in prominent_maxima(series, opts.prominence) {
            seeds.push(Seed::Ldos {
                k,
                probe: p,
                height: series[k],
            });
        }
    }
    for (k, _) in prominent_maxima(&scan.ln_t, opts.prominence.ln()) {
        seeds.push(Seed::Transmission { k });
    }
    seeds.sort_by_key(|s| s.half_index());

    let mut candidates = Vec::new();
    let mut start = 0;
    while start < seeds.len() {
        let mut end = start + 1;
        while end < seeds.len() && seeds[end].half_index() <= seeds[end - 1].half_index() + 4 {
            end += 1;
        }
        if let Some(c) = refiner.refine_cluster(&seeds[start..end], &scan)? {
            if window.contains(c.lambda_peak) && c.prominence >= opts.prominence {
                candidates.push(c);
            }
        }
        start = end;
    }
    Ok(merge_candidates(candidates))
}

/// Merges candidates closer than half a linewidth, keeping the most prominent.
fn merge_candidates(mut candidates: Vec<PeakCandidate>) -> Vec<PeakCandidate> {
    candidates.sort_by(|a, b| a.omega_peak.total_cmp(&b.omega_peak));
    let mut out: Vec<PeakCandidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if let Some(last) = out.last_mut() {
            if (c.omega_peak - last.omega_peak).abs() < 0.5 * c.fwhm.max(last.fwhm) {
                if c.prominence > last.prominence {
                    *last = c;
                }
                continue;
            }
        }
        out.push(c);
    }
    out
}

struct Refiner<'a, S: ?Sized> {
    source: &'a mut S,
    rho: Vec<f64>,
    step: f64,
    precision: f64,
}

impl<S: SpectralSource + ?Sized> Refiner<'_, S> {
    fn rho_at(&mut self, omega: f64, probe: usize) -> Result<f64> {
        self.source.eval(omega, &mut self.rho)?;
        Ok(self.rho[probe])
    }

    fn phase_at(&mut self, omega: f64) -> Result<f64> {
        Ok(self.source.eval(omega, &mut self.rho)?.1)
    }

    fn refine_cluster(&mut self, seeds: &[Seed], scan: &CoarseScan) -> Result<Option<PeakCandidate>> {
        let step_seed = seeds
            .iter()
            .filter_map(|s| match *s {
                Seed::Step { k, jump } => Some((k, jump)),
                _ => None,
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let ldos_seed = seeds
            .iter()
            .filter_map(|s| match *s {
                Seed::Ldos { k, probe, height } => Some((k, probe, height)),
                _ => None,
            })
            .max_by(|a, b| a.2.total_cmp(&b.2));
        let last = scan.omega.len() - 1;

        // rough center and the coarse index it belongs to
        let (center, k_ref) = if let Some((k, _)) = step_seed {
            let target = 0.5 * (scan.phase[k] + scan.phase[k + 1]);
            let w = self.bisect_phase(target, scan.omega[k], scan.omega[k + 1])?;
            (w, k)
        } else if let Some((k, _, _)) = ldos_seed {
            (scan.omega[k], k)
        } else {
            match seeds.first() {
                Some(Seed::Transmission { k }) => (scan.omega[*k], *k),
                _ => return Ok(None),
            }
        };

        let probe = match (step_seed, ldos_seed) {
            (None, Some((_, p, _))) => p,
            _ => {
                self.source.eval(center, &mut self.rho)?;
                argmax(&self.rho)
            }
        };

        let fwhm = self.phase_width(center)?;
        let half_bracket = if step_seed.is_some() {
            fwhm.min(self.step)
        } else {
            self.step
        };
        let (lo, hi) = (center - half_bracket, center + half_bracket);
        let (omega_peak, height) = self.golden_max(lo, hi, probe)?;

        let span = ((3.0 * fwhm / self.step).ceil() as usize).max(3);
        let from = k_ref.saturating_sub(span);
        let to = (k_ref + span + 1).min(last);
        let base = scan.rho[probe][from..=to]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Ok(Some(PeakCandidate {
            lambda_peak: lambda_from_omega(omega_peak),
            omega_peak,
            probe_z: self.source.probe_positions()[probe],
            probe,
            prominence: height - base,
            fwhm,
        }))
    }

    /// Bisection for `phase(ω) = target` on a bracket with increasing phase.
    fn bisect_phase(&mut self, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        let tol = self.precision * 0.5 * (lo + hi);
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.phase_at(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Distance between the frequencies where the phase is `±π/4` from its
    /// value at `center`.
    fn phase_width(&mut self, center: f64) -> Result<f64> {
        let quarter = 0.25 * std::f64::consts::PI;
        let phi0 = self.phase_at(center)?;
        let upper = self.phase_level(phi0 + quarter, center, 1.0)?;
        let lower = self.phase_level(phi0 - quarter, center, -1.0)?;
        match (upper, lower) {
            (Some(u), Some(l)) if u > l => Ok(u - l),
            (Some(u), None) => Ok(2.0 * (u - center)),
            (None, Some(l)) => Ok(2.0 * (center - l)),
            _ => Ok(self.step),
        }
    }

    /// Finds where the phase crosses `target` moving away from `from` in
    /// direction `dir`, expanding the bracket geometrically.
    fn phase_level(&mut self, target: f64, from: f64, dir: f64) -> Result<Option<f64>> {
        let beyond = |phi: f64| if dir > 0.0 { phi >= target } else { phi <= target };
        let mut near = from;
        let mut delta = self.step / 64.0;
        let mut far = from + dir * delta;
        let mut found = false;
        for _ in 0..24 {
            if beyond(self.phase_at(far)?) {
                found = true;
                break;
            }
            near = far;
            delta *= 2.0;
            far = from + dir * delta;
        }
        if !found {
            return Ok(None);
        }
        // bisect between near (not beyond) and far (beyond)
        for _ in 0..200 {
            let gap = (far - near).abs();
            if gap <= 1e-4 * (far - from).abs() || gap <= 8.0 * f64::EPSILON * from {
                break;
            }
            let mid = 0.5 * (near + far);
            if beyond(self.phase_at(mid)?) {
                far = mid;
            } else {
                near = mid;
            }
        }
        Ok(Some(0.5 * (near + far)))
    }

    /// Golden-section maximisation of the LDOS at `probe` on `[lo, hi]`.
    fn golden_max(&mut self, mut lo: f64, mut hi: f64, probe: usize) -> Result<(f64, f64)> {
        let tol = self.precision * 0.5 * (lo + hi);
        let mut x1 = hi - GOLDEN * (hi - lo);
        let mut x2 = lo + GOLDEN * (hi - lo);
        let mut f1 = self.rho_at(x1, probe)?;
        let mut f2 = self.rho_at(x2, probe)?;
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - GOLDEN * (hi - lo);
                f1 = self.rho_at(x1, probe)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + GOLDEN * (hi - lo);
                f2 = self.rho_at(x2, probe)?;
            }
        }
        Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
