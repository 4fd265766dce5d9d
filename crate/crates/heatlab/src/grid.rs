//! Periodic pseudo-spectral representation of real scalar fields on
//! `x ∈ [-a, a)` with `N` uniform points, plus the exact spectral
//! primitives everything else is built from: differentiation,
//! antidifferentiation, heat propagation and the `∫ dx` inner product.
//!
//! Conventions, fixed once for the whole crate:
//! * grid points `x_i = -a + i·dx`, `dx = 2a/N`;
//! * wavenumbers `k_m = π m / a` for `m ∈ {-N/2, …, N/2-1}`;
//! * a field is stored by its samples; its spectral coefficients are the
//!   true Fourier coefficients with respect to `e^{i k_m x}` (phases
//!   referenced to `x = 0`, not to the first grid point);
//! * `heat_propagate(f, s)` multiplies mode `m` by `e^{-s k_m²}`, i.e. it
//!   applies the semigroup generated by `∂_xx` for time `s`. Negative `s`
//!   is the ill-posed backward direction and is gated, see [`AmpGate`].

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

/// Uniform periodic grid on `[-a, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    half_width: f64,
    n_points: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("n_points must be an even integer >= 8, got {0}")]
    BadPointCount(usize),
}

impl GridSpec {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self, GridError> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(GridError::BadHalfWidth(half_width));
        }
        if n_points < 8 || n_points % 2 != 0 {
            return Err(GridError::BadPointCount(n_points));
        }
        Ok(GridSpec { half_width, n_points })
    }

    /// Desk-scale default: `N = 64`, `a = π`.
    pub fn default_desk() -> Self {
        GridSpec { half_width: std::f64::consts::PI, n_points: 64 }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Signed mode index for FFT bin `j` (bin `N/2` is the Nyquist mode `-N/2`).
    pub fn bin_mode(&self, j: usize) -> i64 {
        let n = self.n_points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Wavenumber `k_m = π m / a` of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        std::f64::consts::PI * self.bin_mode(j) as f64 / self.half_width
    }
}

/// Real scalar field sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.n_points() {
            return Err(FieldError::LengthMismatch { expected: grid.n_points(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field { grid, values: vec![0.0; grid.n_points()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_points()).map(|i| f(grid.point(i))).collect();
        Field { grid, values }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Field { grid, values: vec![c; grid.n_points()] }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `sqrt(∫ f² dx)`.
    pub fn l2_norm(&self) -> f64 {
        inner(self, self).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect();
        Field { grid: self.grid, values }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |x, y| x - y)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }
}

/// Complex Fourier coefficients of a real field, ordered by FFT bin.
///
/// `modes[j]` multiplies `e^{i k_m x}` with `m = bin_mode(j)`; a real field
/// has Hermitian symmetry `modes[N-j] = conj(modes[j])`.
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    grid: GridSpec,
    modes: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    /// Coefficient of mode `m` (signed index).
    pub fn mode(&self, m: i64) -> Complex64 {
        let n = self.grid.n_points() as i64;
        let j = m.rem_euclid(n) as usize;
        self.modes[j]
    }

    /// Largest Hermitian-symmetry violation, relative to the largest mode.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_points();
        let scale = self.modes.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        let mut worst = self.modes[0].im.abs();
        for j in 1..n {
            let d = (self.modes[j] - self.modes[(n - j) % n].conj()).norm();
            worst = worst.max(d);
        }
        worst / scale
    }

    /// `sqrt(2a · Σ |f̂_m|²)`; equals the field's `l2_norm` (Parseval).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.modes.iter().map(|z| z.norm_sqr()).sum();
        (2.0 * self.grid.half_width() * s).sqrt()
    }
}

fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static PLANS: OnceLock<Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> =
        OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Forward transform: samples -> Fourier coefficients w.r.t. `e^{i k_m x}`.
pub fn to_coeffs(f: &Field) -> SpectralCoeffs {
    let n = f.grid.n_points();
    let (fwd, _) = fft_pair(n);
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let scale = 1.0 / n as f64;
    // Samples start at x = -a, so bin j carries the phase (-1)^m relative
    // to coefficients referenced to x = 0.
    let modes = buf
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let sign = if f.grid.bin_mode(j) % 2 == 0 { 1.0 } else { -1.0 };
            z * sign * scale
        })
        .collect();
    SpectralCoeffs { grid: f.grid, modes }
}

/// Inverse transform; the imaginary residue of the reconstruction is dropped.
pub fn to_field(c: &SpectralCoeffs) -> Field {
    let n = c.grid.n_points();
    let (_, inv) = fft_pair(n);
    let mut buf: Vec<Complex64> = c
        .modes
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let sign = if c.grid.bin_mode(j) % 2 == 0 { 1.0 } else { -1.0 };
            z * sign
        })
        .collect();
    inv.process(&mut buf);
    Field { grid: c.grid, values: buf.iter().map(|z| z.re).collect() }
}

/// Apply a per-mode multiplier in spectral space.
pub fn apply_multiplier(f: &Field, mult: impl Fn(i64, f64) -> Complex64) -> Field {
    let mut c = to_coeffs(f);
    let grid = c.grid;
    for j in 0..grid.n_points() {
        let m = grid.bin_mode(j);
        let k = grid.wavenumber(j);
        c.modes[j] *= mult(m, k);
    }
    to_field(&c)
}

/// Spectral derivative of the given order. Order 0 is the identity.
///
/// The Nyquist mode of an odd-order derivative is zeroed, which keeps the
/// operation real and antisymmetric.
pub fn differentiate(f: &Field, order: u32) -> Field {
    if order == 0 {
        return f.clone();
    }
    apply_multiplier(f, |m, k| {
        if order % 2 == 1 && m == -(f.grid.n_points() as i64) / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k).powi(order as i32)
        }
    })
}

/// Zero-mean antiderivative: mode `m ≠ 0` is divided by `i k_m`, the zero
/// mode of the output is set to 0.
///
/// The returned flag is `true` iff `|mean(f)| > mean_tol`: the input had a
/// component in the kernel direction, on which the antiderivative acts as a
/// pseudo-inverse only.
pub fn antidifferentiate(f: &Field, mean_tol: f64) -> (Field, bool) {
    let kernel_flag = f.mean().abs() > mean_tol;
    let g = apply_multiplier(f, |m, k| {
        if m == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0) / Complex64::new(0.0, k)
        }
    });
    (g, kernel_flag)
}

/// Gate for backward-heat (mode-amplifying) applications.
///
/// When a multiplier grows like `e^{A k²}`, modes at or below the noise
/// floor `noise_rel · max|f̂|` are zeroed instead of amplified; a mode above
/// the floor whose growth factor exceeds `factor_cap` aborts the operation.
#[derive(Debug, Clone, Copy)]
pub struct AmpGate {
    pub noise_rel: f64,
    pub factor_cap: f64,
}

impl Default for AmpGate {
    fn default() -> Self {
        AmpGate { noise_rel: 1e6 * f64::EPSILON, factor_cap: 1e40 }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error(
    "amplification gate: mode {mode} (|coeff| {coeff:.3e}, occupied) would grow by {factor:.3e} > cap {cap:.3e}"
)]
pub struct AmplificationError {
    pub mode: i64,
    pub coeff: f64,
    pub factor: f64,
    pub cap: f64,
}

/// Heat semigroup: mode `m` is multiplied by `e^{-s k_m²}`.
///
/// `s >= 0` is the smoothing direction and always succeeds; `s < 0` is
/// backward heat and passes through the [`AmpGate`].
pub fn heat_propagate_gated(f: &Field, s: f64, gate: &AmpGate) -> Result<Field, AmplificationError> {
    let mut c = to_coeffs(f);
    let grid = c.grid;
    if s >= 0.0 {
        for j in 0..grid.n_points() {
            let k = grid.wavenumber(j);
            c.modes[j] *= (-s * k * k).exp();
        }
        return Ok(to_field(&c));
    }
    let peak = c.modes.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let floor = gate.noise_rel * peak;
    for j in 0..grid.n_points() {
        let k = grid.wavenumber(j);
        let factor = (-s * k * k).exp();
        let mag = c.modes[j].norm();
        if mag <= floor {
            c.modes[j] = Complex64::new(0.0, 0.0);
        } else if factor > gate.factor_cap {
            return Err(AmplificationError {
                mode: grid.bin_mode(j),
                coeff: mag,
                factor,
                cap: gate.factor_cap,
            });
        } else {
            c.modes[j] *= factor;
        }
    }
    Ok(to_field(&c))
}

pub fn heat_propagate(f: &Field, s: f64) -> Result<Field, AmplificationError> {
    heat_propagate_gated(f, s, &AmpGate::default())
}

/// `τ = e^{-t ∂_xx} ω`; amplifies high modes for `t > 0` and is gated.
pub fn to_tau(f: &Field, t: f64) -> Result<Field, AmplificationError> {
    heat_propagate(f, -t)
}

/// `ω = e^{t ∂_xx} τ`; the general heat solution from initial data `τ`.
pub fn from_tau(tau: &Field, t: f64) -> Result<Field, AmplificationError> {
    heat_propagate(tau, t)
}

/// `∫ f g dx` (rectangle rule; spectrally accurate on the periodic grid).
pub fn inner(f: &Field, g: &Field) -> f64 {
    assert_eq!(f.grid, g.grid, "fields live on different grids");
    f.values.iter().zip(&g.values).map(|(&x, &y)| x * y).sum::<f64>() * f.grid.dx()
}

/// Spectral projection of `δ(x - s0)`: every Fourier mode equals
/// `e^{-i k_m s0} / 2a`.
pub fn periodized_delta(grid: GridSpec, s0: f64) -> Field {
    let inv_2a = 1.0 / (2.0 * grid.half_width());
    let values = (0..grid.n_points())
        .map(|i| {
            let x = grid.point(i);
            let mut acc = 0.0;
            for j in 0..grid.n_points() {
                let k = grid.wavenumber(j);
                acc += (k * (x - s0)).cos();
            }
            acc * inv_2a
        })
        .collect();
    Field { grid, values }
}

/// Free-space heat kernel `e^{-(x-s0)²/4t} / sqrt(4πt)`.
pub fn heat_kernel(x: f64, t: f64, s0: f64) -> f64 {
    let d = x - s0;
    (-d * d / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Columnar serialization: header `# a=<a> N=<N> t=<t>`, then `x value`
/// rows. 17 significant decimal digits, so the round trip is bit exact.
pub fn field_to_string(f: &Field, t: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# a={:.16e} N={} t={:.16e}", f.grid.half_width(), f.grid.n_points(), t);
    for i in 0..f.grid.n_points() {
        let _ = writeln!(out, "{:.16e} {:.16e}", f.grid.point(i), f.values[i]);
    }
    out
}

/// Parse the format produced by [`field_to_string`]; returns the field and
/// the time stamp from the header.
pub fn field_from_str(s: &str) -> Result<(Field, f64), FieldIoError> {
    let mut lines = s.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| FieldIoError::Malformed { line: 1, msg: "empty input".into() })?;
    let bad = |line: usize, msg: &str| FieldIoError::Malformed { line, msg: msg.to_string() };
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| bad(1, "header must start with '#'"))?
        .trim();
    let mut a = None;
    let mut n = None;
    let mut t = None;
    for tok in header.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| bad(1, "header tokens are key=value"))?;
        match key {
            "a" => a = Some(val.parse::<f64>().map_err(|e| bad(1, &format!("a: {e}")))?),
            "N" => n = Some(val.parse::<usize>().map_err(|e| bad(1, &format!("N: {e}")))?),
            "t" => t = Some(val.parse::<f64>().map_err(|e| bad(1, &format!("t: {e}")))?),
            other => return Err(bad(1, &format!("unknown header key '{other}'"))),
        }
    }
    let a = a.ok_or_else(|| bad(1, "missing a"))?;
    let n = n.ok_or_else(|| bad(1, "missing N"))?;
    let t = t.ok_or_else(|| bad(1, "missing t"))?;
    let grid = GridSpec::new(a, n)?;
    let mut values = Vec::with_capacity(n);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace();
        let _x: f64 = cols
            .next()
            .ok_or_else(|| bad(idx + 1, "missing x column"))?
            .parse()
            .map_err(|e| bad(idx + 1, &format!("x: {e}")))?;
        let v: f64 = cols
            .next()
            .ok_or_else(|| bad(idx + 1, "missing value column"))?
            .parse()
            .map_err(|e| bad(idx + 1, &format!("value: {e}")))?;
        values.push(v);
    }
    Ok((Field::new(grid, values)?, t))
}
