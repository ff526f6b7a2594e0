//! Layer-by-layer propagation of the two outgoing solutions of the 1D
//! Helmholtz equation `ψ'' + k0² n(z)² ψ = 0`.
//!
//! States are `(ψ, ψ'/k0)` pairs. Each sweep keeps them renormalized, so only
//! directions are stored; every derived quantity (Green's function, reflection,
//! transmission) is a ratio in which the scale factors cancel. The running log
//! scale is kept only where an absolute magnitude (ln T) is needed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::stack::Stack;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const RESCALE_HI: f64 = 1e100;
const RESCALE_LO: f64 = 1e-100;
/// Layers between magnitude checks; one layer grows a state by at most a
/// factor of order `max(n, 1/n)`, far inside the rescale margins.
const CHECK_EVERY: usize = 16;

/// Scalar type of the per-layer coefficients: `f64` for lossless stacks,
/// complex otherwise.
pub(crate) trait Coef:
    Copy
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Mul<C64, Output = C64>
{
    fn from_layer(n_real: f64, n_imag: f64) -> Self;
    fn scale(self, x: f64) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn recip(self) -> Self;
    fn to_c64(self) -> C64;
}

impl Coef for f64 {
    fn from_layer(n_real: f64, _n_imag: f64) -> Self {
        n_real
    }
    #[inline]
    fn scale(self, x: f64) -> Self {
        self * x
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Coef for C64 {
    fn from_layer(n_real: f64, n_imag: f64) -> Self {
        C64::new(n_real, n_imag)
    }
    #[inline]
    fn scale(self, x: f64) -> Self {
        self * x
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    #[inline]
    fn recip(self) -> Self {
        self.inv()
    }
    #[inline]
    fn to_c64(self) -> C64 {
        self
    }
}

/// Field and scaled derivative `(ψ, ψ'/k0)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct State {
    pub u: C64,
    pub v: C64,
}

impl State {
    #[inline]
    fn magnitude(&self) -> f64 {
        self.u
            .re
            .abs()
            .max(self.u.im.abs())
            .max(self.v.re.abs())
            .max(self.v.im.abs())
    }

    pub fn normalized(self) -> State {
        let m = self.magnitude();
        if m > 0.0 && m.is_finite() {
            State {
                u: self.u / m,
                v: self.v / m,
            }
        } else {
            self
        }
    }

    #[inline]
    fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Wronskian `u_L v_R − v_L u_R` (scaled by 1/k0).
#[inline]
pub(crate) fn wronskian(left: State, right: State) -> C64 {
    left.u * right.v - left.v * right.u
}

/// `−2 n_ref Im(ψ_L ψ_R / W)`: the LDOS relative to a homogeneous medium of index `n_ref`.
/// Returns `None` when the solutions are degenerate.
#[inline]
pub(crate) fn relative_ldos(left: State, right: State, n_ref: f64) -> Result<f64, f64> {
    let l = left.normalized();
    let r = right.normalized();
    let w = wronskian(l, r);
    let wn = w.norm();
    if !(wn >= 1e-300) {
        return Err(wn);
    }
    Ok(-2.0 * n_ref * (l.u * r.u / w).im)
}

#[derive(Debug, Clone, Copy)]
struct LayerCoefs<T> {
    c: T,
    s_over_n: T,
    n_s: T,
}

/// Prepared stack geometry with per-wavenumber propagation coefficients.
pub(crate) struct Sweeper<T: Coef> {
    n: Vec<T>,
    inv_n: Vec<T>,
    d: Vec<f64>,
    /// Optical thickness `Re(n)·d` per layer, and its maximum.
    optical: Vec<f64>,
    max_optical: f64,
    /// Boundary positions `z_0 = 0 … z_N = L`.
    bounds: Vec<f64>,
    n_embed: f64,
    k0: f64,
    coefs: Vec<LayerCoefs<T>>,
    /// Per-layer phase rotation for stepping `k0` on a uniform grid.
    rotation: Vec<(T, T)>,
    rotation_dk: f64,
}

/// Result of the right-to-left sweep of the right-outgoing solution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BackwardSummary {
    /// Right-going amplitude at z = 0 (left medium), in units of `exp(log_scale)`.
    pub a0: C64,
    /// Left-going amplitude at z = 0.
    pub b0: C64,
    pub log_scale: f64,
    /// Unwrapped transmission phase, continuous in frequency.
    pub phase: f64,
}

impl BackwardSummary {
    pub fn t(&self) -> C64 {
        self.a0.inv() * (-self.log_scale).exp()
    }

    pub fn r(&self) -> C64 {
        self.b0 / self.a0
    }

    pub fn ln_t(&self) -> f64 {
        -2.0 * (self.a0.norm().ln() + self.log_scale)
    }
}

impl<T: Coef> Sweeper<T> {
    pub fn new(stack: &Stack) -> Self {
        let layers = stack.layers();
        let n: Vec<T> = layers.iter().map(|l| T::from_layer(l.n_real, l.n_imag)).collect();
        let inv_n = n.iter().map(|&x| x.recip()).collect();
        let d: Vec<f64> = layers.iter().map(|l| l.thickness).collect();
        let mut bounds = Vec::with_capacity(d.len() + 1);
        bounds.push(0.0);
        // compensated running sum, so the last boundary equals the cached length
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &t in &d {
            let y = t - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            bounds.push(sum);
        }
        let count = d.len();
        let optical: Vec<f64> = layers.iter().zip(&d).map(|(l, &t)| l.n_real * t).collect();
        let max_optical = optical.iter().copied().fold(0.0, f64::max);
        Sweeper {
            n,
            inv_n,
            d,
            optical,
            max_optical,
            bounds,
            n_embed: stack.n_embed(),
            k0: f64::NAN,
            coefs: Vec::with_capacity(count),
            rotation: Vec::new(),
            rotation_dk: f64::NAN,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.d.len()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn total_length(&self) -> f64 {
        *self.bounds.last().unwrap_or(&0.0)
    }

    pub fn n_embed(&self) -> f64 {
        self.n_embed
    }

    /// Whether some layer is optically thick at `k0`: its phase advance
    /// exceeds π/2, so one chord per layer no longer tracks the winding.
    pub fn has_thick_layers(&self, k0: f64) -> bool {
        self.max_optical * k0 > FRAC_PI_2
    }

    /// Recomputes every layer coefficient for vacuum wavenumber `k0`.
    pub fn set_k0(&mut self, k0: f64) {
        self.k0 = k0;
        self.coefs.clear();
        for j in 0..self.d.len() {
            let phi = self.n[j].scale(k0 * self.d[j]);
            let (s, c) = phi.sin_cos();
            self.coefs.push(LayerCoefs {
                c,
                s_over_n: s * self.inv_n[j],
                n_s: self.n[j] * s,
            });
        }
    }

    /// Prepares [`Sweeper::step_k0`] for increments of `dk`.
    pub fn prepare_steps(&mut self, dk: f64) {
        self.rotation_dk = dk;
        self.rotation = (0..self.d.len())
            .map(|j| {
                let (s, c) = self.n[j].scale(dk * self.d[j]).sin_cos();
                (c, s)
            })
            .collect();
    }

    /// Advances `k0` by the prepared increment using angle addition instead of
    /// fresh trigonometry. Callers resynchronise with `set_k0` periodically.
    pub fn step_k0(&mut self) {
        debug_assert_eq!(self.rotation.len(), self.d.len());
        self.k0 += self.rotation_dk;
        for j in 0..self.d.len() {
            let (rc, rs) = self.rotation[j];
            let coef = &mut self.coefs[j];
            // recover sin from s/n to keep a single stored copy
            let s = coef.s_over_n * self.n[j];
            let c = coef.c;
            let c_new = c * rc - s * rs;
            let s_new = s * rc + c * rs;
            coef.c = c_new;
            coef.s_over_n = s_new * self.inv_n[j];
            coef.n_s = self.n[j] * s_new;
        }
    }

    /// State of the left-outgoing solution at a point `delta` into layer `j`,
    /// given its state at the layer start.
    pub fn forward_partial(&self, j: usize, st: State, delta: f64) -> State {
        partial_step(self.n[j], self.inv_n[j], self.k0 * delta, st)
    }

    /// State of the right-outgoing solution at a point `delta` before the end
    /// of layer `j`, given its state at the layer end.
    pub fn backward_partial(&self, j: usize, st: State, delta: f64) -> State {
        partial_step(self.n[j], self.inv_n[j], -self.k0 * delta, st)
    }

    pub fn left_start(&self) -> State {
        State {
            u: C64::new(1.0, 0.0),
            v: -I * self.n_embed,
        }
    }

    pub fn right_start(&self) -> State {
        State {
            u: C64::new(1.0, 0.0),
            v: I * self.n_embed,
        }
    }

    /// Sweeps the left-outgoing solution from z = 0 to z = L, writing the
    /// (normalized) state at each boundary index in `record` (ascending) to `out`.
    /// Returns `false` on a non-finite state.
    pub fn forward(&self, record: &[usize], out: &mut [State]) -> bool {
        debug_assert_eq!(record.len(), out.len());
        let n_layers = self.d.len();
        let mut st = self.left_start();
        let mut next = 0;
        let mut j = 0;
        loop {
            while next < record.len() && record[next] == j {
                out[next] = st.normalized();
                next += 1;
            }
            if j == n_layers {
                break;
            }
            let mut stop = (j + CHECK_EVERY).min(n_layers);
            if next < record.len() {
                stop = stop.min(record[next]);
            }
            for k in &self.coefs[j..stop] {
                st = State {
                    u: k.c * st.u + k.s_over_n * st.v,
                    v: k.c * st.v - k.n_s * st.u,
                };
            }
            j = stop;
            let m = st.magnitude();
            if !(RESCALE_LO..=RESCALE_HI).contains(&m) {
                if !(m > 0.0 && m.is_finite()) {
                    return false;
                }
                st = State {
                    u: st.u / m,
                    v: st.v / m,
                };
            }
        }
        st.is_finite()
    }

    /// Sweeps the right-outgoing solution from z = L to z = 0, recording states
    /// at boundary indices in `record` (ascending). Also accumulates the log
    /// scale and the unwrapped phase of the right-going amplitude.
    pub fn backward(&self, record: &[usize], out: &mut [State]) -> Option<BackwardSummary> {
        debug_assert_eq!(record.len(), out.len());
        let n_layers = self.d.len();
        let mut st = self.right_start();
        let mut log_scale = 0.0;
        let mut winding: i64 = 0;
        let thick = self.has_thick_layers(self.k0);
        // right-going amplitude (times 2) in the layer last crossed
        let mut prev_a = C64::new(2.0, 0.0);
        let mut next = record.len();
        let mut j = n_layers;
        loop {
            while next > 0 && record[next - 1] == j {
                out[next - 1] = st.normalized();
                next -= 1;
            }
            if j == 0 {
                break;
            }
            let mut stop = j.saturating_sub(CHECK_EVERY);
            if next > 0 {
                stop = stop.max(record[next - 1]);
            }
            if thick {
                for l in (stop..j).rev() {
                    let theta = self.optical[l] * self.k0;
                    if theta > FRAC_PI_2 {
                        // interface jump as a chord, then the exact rotation
                        // of the right-going amplitude across the layer
                        let w = self.inv_n[l] * st.v;
                        let a_end = C64::new(st.u.re + w.im, st.u.im - w.re);
                        winding += crossing(prev_a, a_end);
                        winding -= clockwise_crossings(a_end.arg(), theta);
                    }
                    let k = &self.coefs[l];
                    st = State {
                        u: k.c * st.u - k.s_over_n * st.v,
                        v: k.c * st.v + k.n_s * st.u,
                    };
                    let w = self.inv_n[l] * st.v;
                    let a = C64::new(st.u.re + w.im, st.u.im - w.re);
                    if theta <= FRAC_PI_2 {
                        winding += crossing(prev_a, a);
                    }
                    prev_a = a;
                }
            } else {
                for (k, &inv_n) in self.coefs[stop..j].iter().zip(&self.inv_n[stop..j]).rev() {
                    st = State {
                        u: k.c * st.u - k.s_over_n * st.v,
                        v: k.c * st.v + k.n_s * st.u,
                    };
                    let w = inv_n * st.v;
                    let a = C64::new(st.u.re + w.im, st.u.im - w.re);
                    winding += crossing(prev_a, a);
                    prev_a = a;
                }
            }
            j = stop;
            let m = st.magnitude();
            if !(RESCALE_LO..=RESCALE_HI).contains(&m) {
                if !(m > 0.0 && m.is_finite()) {
                    return None;
                }
                st = State {
                    u: st.u / m,
                    v: st.v / m,
                };
                prev_a /= m;
                log_scale += m.ln();
            }
        }
        let inv_ne = 1.0 / self.n_embed;
        let a0 = 0.5 * (st.u - I * st.v * inv_ne);
        let b0 = 0.5 * (st.u + I * st.v * inv_ne);
        winding += crossing(prev_a, 2.0 * a0);
        let unwrapped = a0.arg() + TAU * winding as f64;
        let summary = BackwardSummary {
            a0,
            b0,
            log_scale,
            phase: -unwrapped,
        };
        if a0.is_finite() && b0.is_finite() && log_scale.is_finite() {
            Some(summary)
        } else {
            None
        }
    }

    /// Layer index containing `z` and the offset from its start. `z = L`
    /// maps to the end of the last layer.
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let n = self.d.len();
        let idx = self.bounds.partition_point(|&b| b <= z);
        let j = idx.saturating_sub(1).min(n - 1);
        (j, (z - self.bounds[j]).clamp(0.0, self.d[j]))
    }

    /// Nearest boundary index to `z`.
    pub fn nearest_boundary(&self, z: f64) -> usize {
        let idx = self.bounds.partition_point(|&b| b < z);
        if idx == 0 {
            0
        } else if idx >= self.bounds.len() {
            self.bounds.len() - 1
        } else if (z - self.bounds[idx - 1]) <= (self.bounds[idx] - z) {
            idx - 1
        } else {
            idx
        }
    }

    pub fn n_real(&self, j: usize) -> f64 {
        self.n[j].to_c64().re
    }
}

/// `K` interleaved lossless sweeps at equally spaced wavenumbers. The
/// recurrences are independent, so running them side by side hides the
/// latency of each one.
pub(crate) struct LaneSweeper<const K: usize> {
    n: Vec<f64>,
    inv_n: Vec<f64>,
    d: Vec<f64>,
    n_embed: f64,
    /// `[c, s/n, n·s]` per lane.
    coefs: Vec<[[f64; 3]; K]>,
    /// Rotation advancing every lane by `K·dk`.
    rotation: Vec<(f64, f64)>,
    k0: [f64; K],
    dk: f64,
}

impl<const K: usize> LaneSweeper<K> {
    pub fn new(base: &Sweeper<f64>) -> Self {
        LaneSweeper {
            n: base.n.clone(),
            inv_n: base.inv_n.clone(),
            d: base.d.clone(),
            n_embed: base.n_embed,
            coefs: vec![[[0.0; 3]; K]; base.d.len()],
            rotation: Vec::new(),
            k0: [f64::NAN; K],
            dk: f64::NAN,
        }
    }

    /// Lane `i` at `k0 + i·dk`, coefficients from fresh trigonometry.
    pub fn set(&mut self, k0: f64, dk: f64) {
        if dk != self.dk {
            self.dk = dk;
            let step = K as f64 * dk;
            self.rotation = self
                .n
                .iter()
                .zip(&self.d)
                .map(|(&n, &d)| {
                    let (s, c) = (n * d * step).sin_cos();
                    (c, s)
                })
                .collect();
        }
        for (i, k) in self.k0.iter_mut().enumerate() {
            *k = k0 + i as f64 * dk;
        }
        for j in 0..self.d.len() {
            let (n, inv_n, d) = (self.n[j], self.inv_n[j], self.d[j]);
            for i in 0..K {
                let (s, c) = (n * d * self.k0[i]).sin_cos();
                self.coefs[j][i] = [c, s * inv_n, n * s];
            }
        }
    }

    /// Moves every lane up by `K·dk`.
    pub fn advance(&mut self) {
        for k in self.k0.iter_mut() {
            *k += K as f64 * self.dk;
        }
        for j in 0..self.d.len() {
            let (rc, rs) = self.rotation[j];
            let (n, inv_n) = (self.n[j], self.inv_n[j]);
            for lane in self.coefs[j].iter_mut() {
                let c = lane[0];
                let s = lane[1] * n;
                let c_new = c * rc - s * rs;
                let s_new = s * rc + c * rs;
                *lane = [c_new, s_new * inv_n, n * s_new];
            }
        }
    }

    /// Lane-parallel [`Sweeper::forward`].
    pub fn forward(&self, record: &[usize], out: &mut [[State; K]]) -> bool {
        let n_layers = self.d.len();
        let start = State {
            u: C64::new(1.0, 0.0),
            v: -I * self.n_embed,
        };
        let mut st = [start; K];
        let mut next = 0;
        let mut j = 0;
        loop {
            while next < record.len() && record[next] == j {
                for i in 0..K {
                    out[next][i] = st[i].normalized();
                }
                next += 1;
            }
            if j == n_layers {
                break;
            }
            let mut stop = (j + CHECK_EVERY).min(n_layers);
            if next < record.len() {
                stop = stop.min(record[next]);
            }
            for k in &self.coefs[j..stop] {
                for i in 0..K {
                    let [c, sn, ns] = k[i];
                    let x = st[i];
                    st[i] = State {
                        u: c * x.u + sn * x.v,
                        v: c * x.v - ns * x.u,
                    };
                }
            }
            j = stop;
            for x in st.iter_mut() {
                let m = x.magnitude();
                if !(RESCALE_LO..=RESCALE_HI).contains(&m) {
                    if !(m > 0.0 && m.is_finite()) {
                        return false;
                    }
                    *x = State {
                        u: x.u / m,
                        v: x.v / m,
                    };
                }
            }
        }
        st.iter().all(|x| x.is_finite())
    }

    /// Lane-parallel [`Sweeper::backward`].
    pub fn backward(&self, record: &[usize], out: &mut [[State; K]]) -> Option<[BackwardSummary; K]> {
        let n_layers = self.d.len();
        let start = State {
            u: C64::new(1.0, 0.0),
            v: I * self.n_embed,
        };
        let mut st = [start; K];
        let mut log_scale = [0.0f64; K];
        let mut winding = [0i64; K];
        let mut prev_a = [C64::new(2.0, 0.0); K];
        let mut next = record.len();
        let mut j = n_layers;
        loop {
            while next > 0 && record[next - 1] == j {
                for i in 0..K {
                    out[next - 1][i] = st[i].normalized();
                }
                next -= 1;
            }
            if j == 0 {
                break;
            }
            let mut stop = j.saturating_sub(CHECK_EVERY);
            if next > 0 {
                stop = stop.max(record[next - 1]);
            }
            for (k, &inv_n) in self.coefs[stop..j].iter().zip(&self.inv_n[stop..j]).rev() {
                for i in 0..K {
                    let [c, sn, ns] = k[i];
                    let x = st[i];
                    let y = State {
                        u: c * x.u - sn * x.v,
                        v: c * x.v + ns * x.u,
                    };
                    let a = C64::new(y.u.re + inv_n * y.v.im, y.u.im - inv_n * y.v.re);
                    winding[i] += crossing(prev_a[i], a);
                    prev_a[i] = a;
                    st[i] = y;
                }
            }
            j = stop;
            for i in 0..K {
                let m = st[i].magnitude();
                if !(RESCALE_LO..=RESCALE_HI).contains(&m) {
                    if !(m > 0.0 && m.is_finite()) {
                        return None;
                    }
                    st[i] = State {
                        u: st[i].u / m,
                        v: st[i].v / m,
                    };
                    prev_a[i] /= m;
                    log_scale[i] += m.ln();
                }
            }
        }
        let inv_ne = 1.0 / self.n_embed;
        let mut result = [BackwardSummary {
            a0: C64::new(0.0, 0.0),
            b0: C64::new(0.0, 0.0),
            log_scale: 0.0,
            phase: 0.0,
        }; K];
        for i in 0..K {
            let a0 = 0.5 * (st[i].u - I * st[i].v * inv_ne);
            let b0 = 0.5 * (st[i].u + I * st[i].v * inv_ne);
            let w = winding[i] + crossing(prev_a[i], 2.0 * a0);
            let unwrapped = a0.arg() + 2.0 * std::f64::consts::PI * w as f64;
            if !(a0.is_finite() && b0.is_finite() && log_scale[i].is_finite()) {
                return None;
            }
            result[i] = BackwardSummary {
                a0,
                b0,
                log_scale: log_scale[i],
                phase: -unwrapped,
            };
        }
        Some(result)
    }
}

/// +1/−1 when the arc from `p` to `q` (shorter than π) crosses the negative
/// real axis counter-clockwise/clockwise.
#[inline]
fn crossing(p: C64, q: C64) -> i64 {
    let p_up = p.im >= 0.0;
    let q_up = q.im >= 0.0;
    // sign of the chord's real-axis intercept, without a branch
    let num = p.re * q.im - q.re * p.im;
    let den = q.im - p.im;
    let hit = (p_up != q_up) & (num * den < 0.0);
    i64::from(hit) * (2 * i64::from(p_up) - 1)
}

/// Crossings of the negative real axis while an argument decreases from
/// `arg` (in (−π, π]) by `theta ≥ 0`.
fn clockwise_crossings(arg: f64, theta: f64) -> i64 {
    let turns = (theta - arg - PI) / TAU;
    if turns > 0.0 {
        turns.ceil() as i64
    } else {
        0
    }
}

#[inline]
fn partial_step<T: Coef>(n: T, inv_n: T, phase_per_n: f64, st: State) -> State {
    let (s, c) = n.scale(phase_per_n).sin_cos();
    let s_over_n = s * inv_n;
    let n_s = n * s;
    State {
        u: c * st.u + s_over_n * st.v,
        v: c * st.v - n_s * st.u,
    }
}

/// Either coefficient flavour behind one interface.
pub(crate) enum AnySweeper {
    Real(Sweeper<f64>),
    Complex(Sweeper<C64>),
}

impl AnySweeper {
    pub fn new(stack: &Stack) -> Self {
        if stack.is_lossless() {
            AnySweeper::Real(Sweeper::new(stack))
        } else {
            AnySweeper::Complex(Sweeper::new(stack))
        }
    }
}

/// Dispatches a body over the concrete sweeper type.
macro_rules! with_sweeper {
    ($any:expr, $s:ident => $body:expr) => {
        match $any {
            $crate::solver::sweep::AnySweeper::Real($s) => $body,
            $crate::solver::sweep::AnySweeper::Complex($s) => $body,
        }
    };
}
pub(crate) use with_sweeper;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clockwise_crossings_count_whole_turns() {
        assert_eq!(clockwise_crossings(0.5, 3.0), 0);
        assert_eq!(clockwise_crossings(-3.0, 0.5), 1);
        assert_eq!(clockwise_crossings(3.0, 0.5), 0);
        assert_eq!(clockwise_crossings(3.0, 6.5), 1);
        assert_eq!(clockwise_crossings(0.0, 4.0 * PI), 2);
    }

    #[test]
    fn crossing_counts_negative_axis_only() {
        let a = C64::from_polar(1.0, 3.0);
        let b = C64::from_polar(1.0, -3.0);
        assert_eq!(crossing(a, b), 1);
        assert_eq!(crossing(b, a), -1);
        let c = C64::from_polar(1.0, 0.2);
        let d = C64::from_polar(1.0, -0.2);
        assert_eq!(crossing(c, d), 0);
    }

    #[test]
    fn step_k0_tracks_exact_coefficients() {
        let stack =
            crate::stack::generate_stack(&crate::stack::DisorderSpec::standard(0.7), 975e-9, 3, 0).unwrap();
        let mut a: Sweeper<f64> = Sweeper::new(&stack);
        let k0 = 2.0 * std::f64::consts::PI / 980e-9;
        let dk = 1e1;
        a.set_k0(k0);
        a.prepare_steps(dk);
        for _ in 0..32 {
            a.step_k0();
        }
        let mut b: Sweeper<f64> = Sweeper::new(&stack);
        b.set_k0(k0 + 32.0 * dk);
        for (x, y) in a.coefs.iter().zip(&b.coefs) {
            assert!((x.c - y.c).abs() < 1e-12);
            assert!((x.n_s - y.n_s).abs() < 1e-12);
        }
    }
}
