//! Periodic-box discretization, discrete Fourier transforms, linear propagators,
//! frequency projections and Sobolev norms.
//!
//! Conventions used throughout the crate:
//!
//! * the box is `[-L/2, L/2)` sampled at `x_n = -L/2 + n·dx`;
//! * raw DFT coefficients `F_j = Σ_n f_n e^{-2πi jn/N}` are stored in standard FFT order,
//!   index `j` carrying wavenumber `ξ_j = 2π j'/L` with `j'` the signed index in `[-N/2, N/2)`;
//! * the continuous (unitary) transform is approximated by `f̂(ξ_j) = dx/√(2π) · F_j`, so that
//!   `Σ_j |f̂(ξ_j)|² · 2π/L = dx Σ_n |f_n|²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_finite, invalid, Result};

/// Default box length `64π`.
pub const DEFAULT_LENGTH: f64 = 64.0 * PI;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1024;

struct GridInner {
    length: f64,
    points: usize,
    dx: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid. Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid1D {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("length", &self.inner.length)
            .field("points", &self.inner.points)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.points == other.inner.points
                && self.inner.length.to_bits() == other.inner.length.to_bits())
    }
}

impl Grid1D {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        ensure_finite("box length", length)?;
        if length <= 0.0 {
            return invalid(format!("box length must be positive, got {length}"));
        }
        if points < 16 || !points.is_power_of_two() {
            return invalid(format!("point count must be a power of two >= 16, got {points}"));
        }
        let dx = length / points as f64;
        let half = (points / 2) as i64;
        let wavenumbers = (0..points)
            .map(|j| {
                let signed = if (j as i64) < half { j as i64 } else { j as i64 - points as i64 };
                2.0 * PI * signed as f64 / length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        Ok(Self {
            inner: Arc::new(GridInner { length, points, dx, wavenumbers, forward, inverse }),
        })
    }

    pub fn default_box() -> Self {
        Self::new(DEFAULT_LENGTH, DEFAULT_POINTS).expect("default grid is valid")
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn points(&self) -> usize {
        self.inner.points
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// Index of the single unpaired (Nyquist) mode, `ξ = -πN/L`.
    pub fn nyquist_index(&self) -> usize {
        self.inner.points / 2
    }

    /// Largest resolved |ξ|.
    pub fn nyquist_wavenumber(&self) -> f64 {
        PI * self.inner.points as f64 / self.inner.length
    }

    /// Spectral quadrature weight `2π/L`.
    pub fn spectral_weight(&self) -> f64 {
        2.0 * PI / self.inner.length
    }

    pub fn x(&self, n: usize) -> f64 {
        -0.5 * self.inner.length + n as f64 * self.inner.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points()).map(|n| self.x(n)).collect()
    }

    /// Signed mode index of FFT slot `j`.
    pub fn signed_index(&self, j: usize) -> i64 {
        let n = self.points() as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.inner.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT including the `1/N` normalization.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf = spectrum.to_vec();
        self.inner.inverse.process(&mut buf);
        let scale = 1.0 / self.points() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.forward.process(&mut buf);
        buf
    }

    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        self.inverse(spectrum).into_iter().map(|c| c.re).collect()
    }

    /// Factor turning a raw DFT coefficient into the unitary Fourier transform sample.
    pub fn unitary_factor(&self) -> f64 {
        self.dx() / (2.0 * PI).sqrt()
    }

    /// Keep-mask of the 2/3 rule: modes with `|j| <= N/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = self.points() as i64 / 3;
        (0..self.points()).map(|j| self.signed_index(j).abs() <= cut).collect()
    }

    fn check_same(&self, other: &Grid1D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            invalid(format!("grid mismatch: {self:?} vs {other:?}"))
        }
    }
}

/// Shared behaviour of the two field kinds so spectral operators can be written once.
pub trait SpectralField: Sized + Clone {
    fn grid(&self) -> &Grid1D;
    fn spectrum(&self) -> Vec<Complex64>;
    fn from_spectrum(grid: &Grid1D, spectrum: &[Complex64]) -> Self;
    /// `dx Σ |f|²`.
    fn l2_norm_sq(&self) -> f64;

    fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    fn apply_multiplier(&self, multiplier: impl Fn(f64) -> Complex64) -> Self {
        let mut spec = self.spectrum();
        for (c, &xi) in spec.iter_mut().zip(self.grid().wavenumbers()) {
            *c *= multiplier(xi);
        }
        Self::from_spectrum(self.grid(), &spec)
    }

    fn same_grid(&self, other: &impl SpectralField) -> Result<()> {
        self.grid().check_same(other.grid())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points() {
            return invalid(format!("expected {} samples, got {}", grid.points(), values.len()));
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("field samples must be finite");
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Construction without the finiteness scan; used on hot paths where blow-up is
    /// detected separately.
    pub(crate) fn from_raw(grid: &Grid1D, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.points());
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); grid.points()])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        Self::from_raw(grid, grid.xs().into_iter().map(f).collect())
    }

    /// Single Fourier mode `e^{iξx}` at signed index `mode`.
    pub fn plane_wave(grid: &Grid1D, mode: i64) -> Self {
        let xi = 2.0 * PI * mode as f64 / grid.length();
        Self::from_fn(grid, |x| Complex64::from_polar(1.0, xi * x))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| v * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `dx Σ f ḡ`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.same_grid(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.dx())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn real_part(&self) -> RealField {
        RealField::from_raw(&self.grid, self.values.iter().map(|c| c.re).collect())
    }

    /// Largest |imaginary part|.
    pub fn imag_residue(&self) -> f64 {
        self.values.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

impl SpectralField for ComplexField {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.values)
    }

    fn from_spectrum(grid: &Grid1D, spectrum: &[Complex64]) -> Self {
        Self::from_raw(grid, grid.inverse(spectrum))
    }

    fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points() {
            return invalid(format!("expected {} samples, got {}", grid.points(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("field samples must be finite");
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub(crate) fn from_raw(grid: &Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.points());
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self::from_raw(grid, vec![0.0; grid.points()])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(grid, grid.xs().into_iter().map(f).collect())
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| v * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(&self.grid, self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// `dx Σ f`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }
}

impl SpectralField for RealField {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward_real(&self.values)
    }

    fn from_spectrum(grid: &Grid1D, spectrum: &[Complex64]) -> Self {
        Self::from_raw(grid, grid.inverse_real(spectrum))
    }

    fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()
    }
}

/// Time-stacked complex field, row-major in time: sample `(k, n)` lives at `k·N + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid1D,
    dt: f64,
    timesteps: usize,
    pad_factor: usize,
    values: Vec<Complex64>,
}

/// Default temporal zero-padding multiplier for space-time transforms.
pub const DEFAULT_PAD_FACTOR: usize = 4;

impl SpaceTimeField {
    pub fn new(grid: &Grid1D, dt: f64, values: Vec<Complex64>) -> Result<Self> {
        ensure_finite("dt", dt)?;
        if dt <= 0.0 {
            return invalid(format!("dt must be positive, got {dt}"));
        }
        let n = grid.points();
        if values.len() % n != 0 {
            return invalid("sample count is not a multiple of the grid size");
        }
        let timesteps = values.len() / n;
        if timesteps < 2 {
            return invalid("a space-time field needs at least two time samples");
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("space-time samples must be finite");
        }
        Ok(Self { grid: grid.clone(), dt, timesteps, pad_factor: DEFAULT_PAD_FACTOR, values })
    }

    pub fn from_slices(dt: f64, slices: &[ComplexField]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return invalid("no time slices");
        };
        let mut values = Vec::with_capacity(slices.len() * first.grid().points());
        for s in slices {
            s.same_grid(first)?;
            values.extend_from_slice(s.values());
        }
        Self::new(first.grid(), dt, values)
    }

    pub fn from_real_slices(dt: f64, slices: &[RealField]) -> Result<Self> {
        let complex: Vec<ComplexField> = slices.iter().map(RealField::to_complex).collect();
        Self::from_slices(dt, &complex)
    }

    pub fn from_fn(grid: &Grid1D, dt: f64, timesteps: usize, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let xs = grid.xs();
        let mut values = Vec::with_capacity(timesteps * xs.len());
        for k in 0..timesteps {
            let t = k as f64 * dt;
            values.extend(xs.iter().map(|&x| f(x, t)));
        }
        Self::new(grid, dt, values)
    }

    pub fn with_pad_factor(mut self, pad_factor: usize) -> Self {
        self.pad_factor = pad_factor.max(1);
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    /// Time covered by the samples, each sample standing for `[t_k, t_k + dt)`.
    pub fn span(&self) -> f64 {
        self.timesteps as f64 * self.dt
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[Complex64] {
        let n = self.grid.points();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_field(&self, k: usize) -> ComplexField {
        ComplexField::from_raw(&self.grid, self.slice(k).to_vec())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        if self.timesteps != other.timesteps || self.dt.to_bits() != other.dt.to_bits() {
            return invalid("space-time fields have different time sampling");
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        })
    }

    /// Applies a per-slice spatial operation.
    pub fn map_slices(&self, f: impl Fn(&ComplexField) -> ComplexField) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for k in 0..self.timesteps {
            values.extend_from_slice(f(&self.slice_field(k)).values());
        }
        Self { values, ..self.clone() }
    }

    pub fn scale_slices(&self, factors: &[f64]) -> Self {
        let n = self.grid.points();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| v * factors[i / n])
            .collect();
        Self { values, ..self.clone() }
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Exact Schrödinger group `S(t)`: multiplier `e^{-iξ²t}`.
pub fn schrodinger_propagate(f: &ComplexField, t: f64) -> Result<ComplexField> {
    ensure_finite("propagation time", t)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.apply_multiplier(|xi| Complex64::from_polar(1.0, -xi * xi * t)))
}

/// Exact Airy group `U(t)` for `w_t = -w_xxx`: multiplier `e^{iξ³t}`.
///
/// The unpaired Nyquist coefficient is left untouched so the output stays real.
pub fn airy_propagate(g: &RealField, t: f64) -> Result<RealField> {
    ensure_finite("propagation time", t)?;
    if t == 0.0 {
        return Ok(g.clone());
    }
    Ok(RealField::from_raw(g.grid(), airy_propagate_complex(&g.to_complex(), t)?.real_part().into_values()))
}

/// Airy group acting on a complex field (used for shifted variables and imaginary-residue checks).
pub fn airy_propagate_complex(g: &ComplexField, t: f64) -> Result<ComplexField> {
    ensure_finite("propagation time", t)?;
    if t == 0.0 {
        return Ok(g.clone());
    }
    let nyq = g.grid().nyquist_index();
    let mut spec = g.spectrum();
    for (j, (c, &xi)) in spec.iter_mut().zip(g.grid().wavenumbers()).enumerate() {
        if j != nyq {
            *c *= Complex64::from_polar(1.0, xi * xi * xi * t);
        }
    }
    Ok(ComplexField::from_spectrum(g.grid(), &spec))
}

/// Low-frequency projection `P_m`: keeps `|ξ| <= m`.
pub fn project_low<F: SpectralField>(f: &F, m: f64) -> Result<F> {
    check_bound(m)?;
    Ok(f.apply_multiplier(|xi| if xi.abs() <= m { one() } else { zero() }))
}

/// High-frequency projection `P_{>=m}`: removes `|ξ| <= m`.
pub fn project_high<F: SpectralField>(f: &F, m: f64) -> Result<F> {
    check_bound(m)?;
    Ok(f.apply_multiplier(|xi| if xi.abs() <= m { zero() } else { one() }))
}

fn check_bound(m: f64) -> Result<()> {
    if m.is_nan() || m < 0.0 {
        return invalid(format!("frequency bound must be >= 0, got {m}"));
    }
    Ok(())
}

/// `J^order`: multiplier `(1+|ξ|)^order`.
pub fn bessel_potential<F: SpectralField>(f: &F, order: f64) -> Result<F> {
    ensure_finite("order", order)?;
    if order == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.apply_multiplier(|xi| Complex64::new((1.0 + xi.abs()).powf(order), 0.0)))
}

/// Spectral first derivative; the Nyquist mode is dropped.
pub fn derivative<F: SpectralField>(f: &F) -> F {
    let nyq = f.grid().nyquist_index();
    let mut spec = f.spectrum();
    for (j, (c, &xi)) in spec.iter_mut().zip(f.grid().wavenumbers()).enumerate() {
        *c = if j == nyq { zero() } else { *c * Complex64::new(0.0, xi) };
    }
    F::from_spectrum(f.grid(), &spec)
}

/// The only homogeneous exponent the norms support (`Ḣ^{-3/8}`).
pub const HOMOGENEOUS_EXPONENT: f64 = -0.375;

/// `(Σ_j w(ξ_j)|f̂(ξ_j)|² · 2π/L)^{1/2}` with `w = (1+|ξ|)^{2s}`, optionally times `|ξ|^{2h}`
/// (in which case the `ξ = 0` mode is dropped).
pub fn sobolev_norm<F: SpectralField>(f: &F, s: f64, homogeneous_exponent: Option<f64>) -> Result<f64> {
    ensure_finite("s", s)?;
    if let Some(h) = homogeneous_exponent {
        if (h - HOMOGENEOUS_EXPONENT).abs() > 1e-15 {
            return invalid(format!("unsupported homogeneous exponent {h}"));
        }
    }
    let grid = f.grid();
    let factor = grid.unitary_factor();
    let mut sum = 0.0;
    for (c, &xi) in f.spectrum().iter().zip(grid.wavenumbers()) {
        let mut w = (1.0 + xi.abs()).powf(2.0 * s);
        if let Some(h) = homogeneous_exponent {
            if xi == 0.0 {
                continue;
            }
            w *= xi.abs().powf(2.0 * h);
        }
        sum += w * (c * factor).norm_sqr();
    }
    Ok((sum * grid.spectral_weight()).sqrt())
}

/// Zeroes the Nyquist coefficient.
pub fn zero_nyquist<F: SpectralField>(f: &F) -> F {
    let mut spec = f.spectrum();
    spec[f.grid().nyquist_index()] = zero();
    F::from_spectrum(f.grid(), &spec)
}

/// Applies the 2/3-rule mask.
pub fn dealias<F: SpectralField>(f: &F) -> F {
    let mask = f.grid().dealias_mask();
    let mut spec = f.spectrum();
    for (c, keep) in spec.iter_mut().zip(mask) {
        if !keep {
            *c = zero();
        }
    }
    F::from_spectrum(f.grid(), &spec)
}

/// Largest |f| over the outer 2.5% of the box on each side, relative to `max(1, peak)`.
pub fn edge_amplitude(values: &[Complex64]) -> f64 {
    let n = values.len();
    let band = (n / 40).max(1);
    let peak = values.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    values[..band]
        .iter()
        .chain(&values[n - band..])
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        / peak
}

/// Fails unless the field decays below `1e-8` near the box edges.
pub fn check_edge_decay(name: &str, values: &[Complex64]) -> Result<()> {
    let edge = edge_amplitude(values);
    if edge > 1e-8 {
        return Err(crate::Error::Precondition(format!(
            "{name} does not decay at the box edges (relative edge amplitude {edge:.3e})"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[inline]
pub(crate) fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_grid() -> Grid1D {
        Grid1D::new(16.0 * PI, 128).unwrap()
    }

    fn gaussian_packet(grid: &Grid1D) -> ComplexField {
        ComplexField::from_fn(grid, |x| Complex64::from_polar((-x * x / 4.0).exp(), 0.7 * x))
    }

    fn random_field(grid: &Grid1D, seed: u64, band: i64) -> ComplexField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut spec = vec![zero(); grid.points()];
        for (j, c) in spec.iter_mut().enumerate() {
            if grid.signed_index(j).abs() <= band {
                *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        ComplexField::from_spectrum(grid, &spec)
    }

    #[test]
    fn grid_invariants() {
        let g = Grid1D::default_box();
        assert_eq!(g.dx() * g.points() as f64, g.length());
        let ks = g.wavenumbers();
        assert_eq!(ks[0], 0.0);
        for j in 1..g.points() / 2 {
            assert_eq!(ks[j], -ks[g.points() - j]);
        }
        assert!((ks[g.nyquist_index()] + g.nyquist_wavenumber()).abs() < 1e-12);
        assert!(Grid1D::new(10.0, 100).is_err());
        assert!(Grid1D::new(10.0, 8).is_err());
        assert!(Grid1D::new(-1.0, 64).is_err());
    }

    #[test]
    fn schrodinger_single_mode() {
        let g = Grid1D::default_box();
        let xi0 = 8.0 * PI / g.length();
        let f = ComplexField::plane_wave(&g, 4);
        let out = schrodinger_propagate(&f, 0.3).unwrap();
        let phase = Complex64::from_polar(1.0, -xi0 * xi0 * 0.3);
        for (o, x) in out.values().iter().zip(g.xs()) {
            let expect = phase * Complex64::from_polar(1.0, xi0 * x);
            assert!((o - expect).norm() < 1e-12);
        }
        assert_eq!(schrodinger_propagate(&f, 0.0).unwrap(), f);
        assert!(schrodinger_propagate(&f, f64::NAN).is_err());
    }

    #[test]
    fn schrodinger_preserves_gaussian_mass() {
        let g = small_grid();
        let f = gaussian_packet(&g);
        for t in [0.1, 1.0, 7.5] {
            let out = schrodinger_propagate(&f, t).unwrap();
            assert!((out.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-12);
        }
    }

    #[test]
    fn airy_single_mode() {
        let g = Grid1D::default_box();
        let xi0 = 8.0 * PI / g.length();
        let f = RealField::from_fn(&g, |x| (xi0 * x).cos());
        let t = 0.7;
        let out = airy_propagate(&f, t).unwrap();
        for (o, x) in out.values().iter().zip(g.xs()) {
            assert!((o - (xi0 * x + xi0.powi(3) * t).cos()).abs() < 1e-12);
        }
        assert_eq!(airy_propagate(&f, 0.0).unwrap(), f);
        assert!(airy_propagate(&f, f64::INFINITY).is_err());
    }

    #[test]
    fn airy_keeps_band_limited_fields_real() {
        let g = small_grid();
        for seed in 0..20 {
            let f = random_field(&g, seed, 40);
            let real = f.real_part();
            let out = airy_propagate_complex(&real.to_complex(), 0.37).unwrap();
            assert!(out.imag_residue() < 1e-12);
            assert!((out.l2_norm() - real.l2_norm()).abs() / real.l2_norm() < 1e-12);
        }
    }

    #[test]
    fn projections() {
        let g = small_grid();
        let f = ComplexField::plane_wave(&g, 5);
        let xi0 = 2.0 * PI * 5.0 / g.length();
        let kept = project_low(&f, xi0 + 0.01).unwrap();
        assert!(kept.sub(&f).unwrap().max_abs() < 1e-14);
        let removed = project_low(&f, xi0 - 0.01).unwrap();
        assert!(removed.max_abs() < 1e-14);
        assert!(project_low(&f, -1.0).is_err());
        assert!(project_high(&f, -0.5).is_err());

        let r = random_field(&g, 3, 60);
        let low = project_low(&r, 2.0).unwrap();
        let high = project_high(&r, 2.0).unwrap();
        assert!(low.add(&high).unwrap().sub(&r).unwrap().max_abs() < 1e-12);
        assert!(project_low(&low, 2.0).unwrap().sub(&low).unwrap().max_abs() < 1e-14);
        assert!(low.inner(&high).unwrap().norm() < 1e-12 * r.l2_norm_sq());
    }

    #[test]
    fn bessel_potential_cases() {
        let g = small_grid();
        let ones = ComplexField::from_fn(&g, |_| one());
        let out = bessel_potential(&ones, 3.0).unwrap();
        assert!(out.sub(&ones).unwrap().max_abs() < 1e-12);
        let f = ComplexField::plane_wave(&g, 7);
        let xi0 = 2.0 * PI * 7.0 / g.length();
        let out = bessel_potential(&f, 2.5).unwrap();
        let expect = f.scale(Complex64::new((1.0 + xi0).powf(2.5), 0.0));
        assert!(out.sub(&expect).unwrap().max_abs() < 1e-12);
        assert_eq!(bessel_potential(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn sobolev_norm_cases() {
        let g = small_grid();
        assert_eq!(sobolev_norm(&ComplexField::zeros(&g), 1.0, None).unwrap(), 0.0);
        let f = ComplexField::plane_wave(&g, 6);
        let xi0 = 2.0 * PI * 6.0 / g.length();
        let h1 = sobolev_norm(&f, 1.0, None).unwrap();
        assert!((h1 - (1.0 + xi0) * f.l2_norm()).abs() < 1e-10);
        let l2 = sobolev_norm(&f, 0.0, None).unwrap();
        assert!((l2 - f.l2_norm()).abs() < 1e-12);
        assert!(sobolev_norm(&f, 1.0, Some(-0.5)).is_err());
        let constant = ComplexField::from_fn(&g, |_| one());
        assert!(sobolev_norm(&constant, 1.0, Some(HOMOGENEOUS_EXPONENT)).unwrap() < 1e-12);
    }

    /// Independent oracle: ∫(1+|ξ|)²|f̂(ξ)|² dξ with the analytic transform of the unit-mass
    /// Gaussian `f = π^{-1/4} e^{-x²/2}` (`f̂ = π^{-1/4} e^{-ξ²/2}`), composite Simpson on [-40, 40].
    /// The lattice sum is a trapezoid rule across the kink of `|ξ|` at 0, with bias `≈ Δξ²/(3√π)`,
    /// so the box is long enough to push that below the tolerance.
    #[test]
    fn sobolev_norm_matches_gaussian_quadrature() {
        let g = Grid1D::new(1024.0 * PI, 8192).unwrap();
        let c = PI.powf(-0.25);
        let f = ComplexField::from_fn(&g, |x| Complex64::new(c * (-x * x / 2.0).exp(), 0.0));
        let panels = 200_000;
        let (a, b) = (-40.0_f64, 40.0_f64);
        let h = (b - a) / panels as f64;
        let integrand = |xi: f64| (1.0 + xi.abs()).powi(2) * (c * (-xi * xi / 2.0).exp()).powi(2);
        let mut sum = integrand(a) + integrand(b);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * integrand(a + i as f64 * h);
        }
        let oracle = (sum * h / 3.0).sqrt();
        let value = sobolev_norm(&f, 1.0, None).unwrap();
        assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
    }

    #[test]
    fn derivative_of_plane_wave() {
        let g = small_grid();
        let f = ComplexField::plane_wave(&g, 3);
        let xi0 = 2.0 * PI * 3.0 / g.length();
        let d = derivative(&f);
        let expect = f.scale(Complex64::new(0.0, xi0));
        assert!(d.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn edge_decay_check() {
        let g = Grid1D::default_box();
        let narrow = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0));
        assert!(check_edge_decay("u0", narrow.values()).is_ok());
        let flat = ComplexField::from_fn(&g, |_| one());
        assert!(check_edge_decay("u0", flat.values()).is_err());
    }

    #[test]
    fn space_time_field_validation() {
        let g = small_grid();
        assert!(SpaceTimeField::new(&g, 0.1, vec![zero(); g.points()]).is_err());
        assert!(SpaceTimeField::new(&g, 0.0, vec![zero(); 2 * g.points()]).is_err());
        let st = SpaceTimeField::new(&g, 0.1, vec![one(); 3 * g.points()]).unwrap();
        assert_eq!(st.timesteps(), 3);
        assert!((st.span() - 0.3).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dft_round_trip(seed in 0u64..10_000, log_n in 4u32..11) {
            let g = Grid1D::new(10.0, 1 << log_n).unwrap();
            let f = random_field(&g, seed, (1 << log_n) / 2);
            let back = ComplexField::from_spectrum(&g, &f.spectrum());
            prop_assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
        }

        #[test]
        fn propagators_are_unitary_semigroups(seed in 0u64..10_000, s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let g = small_grid();
            let f = random_field(&g, seed, 50);
            let direct = schrodinger_propagate(&f, s + t).unwrap();
            let composed = schrodinger_propagate(&schrodinger_propagate(&f, s).unwrap(), t).unwrap();
            prop_assert!(direct.sub(&composed).unwrap().l2_norm() <= 1e-11 * f.l2_norm());
            let r = f.real_part();
            let direct = airy_propagate(&r, s + t).unwrap();
            let composed = airy_propagate(&airy_propagate(&r, s).unwrap(), t).unwrap();
            prop_assert!(direct.sub(&composed).unwrap().l2_norm() <= 1e-11 * r.l2_norm());
            prop_assert!((direct.l2_norm() - r.l2_norm()).abs() <= 1e-11 * r.l2_norm());
        }

        #[test]
        fn bessel_potential_composes(seed in 0u64..10_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = small_grid();
            let f = random_field(&g, seed, 30);
            let two_step = bessel_potential(&bessel_potential(&f, a).unwrap(), b).unwrap();
            let one_step = bessel_potential(&f, a + b).unwrap();
            prop_assert!(two_step.sub(&one_step).unwrap().l2_norm() <= 1e-12 * one_step.l2_norm().max(1.0));
        }
    }
}
