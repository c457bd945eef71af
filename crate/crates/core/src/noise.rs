//! Truncated cylindrical Wiener noise: convolution operators, the real trigonometric basis,
//! per-step Gaussian increments and the multiplicative noise terms.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::rng::SeedLineage;
use crate::spectral::{project_low, ComplexField, Grid1D, RealField, SpectralField};

/// Default number of retained basis functions (constant plus 64 cosine/sine pairs).
pub const DEFAULT_BASIS_SIZE: usize = 129;

/// Kernel presets selectable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Centered Gaussian with the given L² norm and standard width.
    Gaussian { l2_mass: f64, width: f64 },
    Zero,
    /// Discrete delta `1/dx` at `x = 0`; convolution is the identity.
    Delta,
    /// `(x, value)` samples, linearly interpolated and zero outside the sampled range.
    Csv { path: String },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Gaussian { l2_mass: 0.5, width: 1.0 }
    }
}

impl KernelSpec {
    pub fn build(&self, grid: &Grid1D) -> Result<RealField> {
        match self {
            KernelSpec::Gaussian { l2_mass, width } => gaussian_kernel(grid, *l2_mass, *width),
            KernelSpec::Zero => Ok(RealField::zeros(grid)),
            KernelSpec::Delta => {
                let mut k = RealField::zeros(grid);
                k.values_mut()[grid.points() / 2] = 1.0 / grid.dx();
                Ok(k)
            }
            KernelSpec::Csv { path } => load_kernel_csv(Path::new(path), grid),
        }
    }
}

/// `c·exp(-x²/(2 width²))` with `c` chosen so that `‖k‖_{L²} = l2_mass`.
pub fn gaussian_kernel(grid: &Grid1D, l2_mass: f64, width: f64) -> Result<RealField> {
    ensure_finite("kernel l2_mass", l2_mass)?;
    ensure_finite("kernel width", width)?;
    if l2_mass < 0.0 || width <= 0.0 {
        return invalid("gaussian kernel needs l2_mass >= 0 and width > 0");
    }
    let c = l2_mass / (PI.powf(0.25) * width.sqrt());
    Ok(RealField::from_fn(grid, |x| c * (-x * x / (2.0 * width * width)).exp()))
}

pub fn load_kernel_csv(path: &Path, grid: &Grid1D) -> Result<RealField> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("kernel csv {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("kernel csv: {e}")))?;
        if record.len() != 2 {
            return Err(Error::Config("kernel csv rows must be `x,value`".into()));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("kernel csv value {s:?}: {e}")))
        };
        let (x, v) = (parse(&record[0])?, parse(&record[1])?);
        if !x.is_finite() || !v.is_finite() {
            return Err(Error::Config("kernel csv contains non-finite values".into()));
        }
        samples.push((x, v));
    }
    if samples.len() < 2 {
        return Err(Error::Config("kernel csv needs at least two samples".into()));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(RealField::from_fn(grid, |x| interpolate(&samples, x)))
}

fn interpolate(samples: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (samples[0], samples[samples.len() - 1]);
    if x < first.0 || x > last.0 {
        return 0.0;
    }
    let i = samples.partition_point(|s| s.0 <= x).clamp(1, samples.len() - 1);
    let (x0, y0) = samples[i - 1];
    let (x1, y1) = samples[i];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Basis function `e_k` of the real trigonometric basis: `1/√L`, then `√(2/L)cos(ξ_q x)`,
/// `√(2/L)sin(ξ_q x)` for `q = 1, 2, …`, and finally the Nyquist cosine `cos(ξ_{N/2}x)/√L`.
pub fn trig_basis_function(grid: &Grid1D, k: usize) -> Result<RealField> {
    let n = grid.points();
    if k >= n {
        return invalid(format!("basis index {k} exceeds grid size {n}"));
    }
    let l = grid.length();
    if k == 0 {
        return Ok(RealField::from_fn(grid, |_| 1.0 / l.sqrt()));
    }
    let q = (k + 1) / 2;
    let xi = 2.0 * PI * q as f64 / l;
    if q == n / 2 {
        return Ok(RealField::from_fn(grid, |x| (xi * x).cos() / l.sqrt()));
    }
    let amp = (2.0 / l).sqrt();
    Ok(if k % 2 == 1 {
        RealField::from_fn(grid, |x| amp * (xi * x).cos())
    } else {
        RealField::from_fn(grid, |x| amp * (xi * x).sin())
    })
}

/// Convolution operator with precomputed images of the retained basis functions.
#[derive(Debug, Clone)]
pub struct NoiseOperator {
    kernel: RealField,
    symbol: Vec<Complex64>,
    basis_images: Vec<RealField>,
    label: String,
}

impl NoiseOperator {
    pub fn new(kernel: RealField, basis_size: usize, label: impl Into<String>) -> Result<Self> {
        let grid = kernel.grid().clone();
        if basis_size == 0 || basis_size > grid.points() {
            return invalid(format!("basis size must be in 1..={}, got {basis_size}", grid.points()));
        }
        if !kernel.is_finite() {
            return invalid("kernel samples must be finite");
        }
        // Kernel samples sit at x_n = -L/2 + n·dx, so the periodic convolution symbol picks up (-1)^j.
        let symbol: Vec<Complex64> = kernel
            .spectrum()
            .into_iter()
            .enumerate()
            .map(|(j, c)| c * grid.dx() * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let mut op = Self { kernel, symbol, basis_images: Vec::new(), label: label.into() };
        op.basis_images = (0..basis_size)
            .map(|k| op.convolve(&trig_basis_function(&grid, k)?))
            .collect::<Result<_>>()?;
        Ok(op)
    }

    pub fn from_spec(grid: &Grid1D, spec: &KernelSpec, basis_size: usize, label: impl Into<String>) -> Result<Self> {
        Self::new(spec.build(grid)?, basis_size, label)
    }

    pub fn grid(&self) -> &Grid1D {
        self.kernel.grid()
    }

    pub fn kernel(&self) -> &RealField {
        &self.kernel
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn basis_size(&self) -> usize {
        self.basis_images.len()
    }

    pub fn basis_images(&self) -> &[RealField] {
        &self.basis_images
    }

    /// Periodic convolution symbol in FFT order.
    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn convolve<F: SpectralField>(&self, f: &F) -> Result<F> {
        f.same_grid(&self.kernel)?;
        let mut spec = f.spectrum();
        for (c, s) in spec.iter_mut().zip(&self.symbol) {
            *c *= s;
        }
        Ok(F::from_spectrum(f.grid(), &spec))
    }

    /// `Σ_k Δβ_k Φe_k`, computed as `Φ(Σ_k Δβ_k e_k)` with the basis sum assembled directly in
    /// Fourier space.
    pub fn realize(&self, inc: &WienerIncrement) -> Result<RealField> {
        self.check_increment(inc)?;
        let grid = self.grid();
        let n = grid.points();
        let l = grid.length();
        let half = n as f64 / 2.0;
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for (k, &db) in inc.values.iter().enumerate() {
            if k == 0 {
                spec[0] += db * n as f64 / l.sqrt();
                continue;
            }
            let q = (k + 1) / 2;
            // On the centered grid, x_n = (n - N/2)dx gives the sign (-1)^q.
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            if q == n / 2 {
                spec[q] += sign * db * n as f64 / l.sqrt();
            } else if k % 2 == 1 {
                let c = sign * db * (2.0 / l).sqrt() * half;
                spec[q] += c;
                spec[n - q] += c;
            } else {
                let c = Complex64::new(0.0, -sign * db * (2.0 / l).sqrt() * half);
                spec[q] += c;
                spec[n - q] -= c;
            }
        }
        for (c, s) in spec.iter_mut().zip(&self.symbol) {
            *c *= s;
        }
        Ok(RealField::from_spectrum(grid, &spec))
    }

    /// Reference route: explicit sum over stored basis images.
    pub fn realize_by_basis(&self, inc: &WienerIncrement) -> Result<RealField> {
        self.check_increment(inc)?;
        let mut acc = vec![0.0; self.grid().points()];
        for (img, &db) in self.basis_images.iter().zip(&inc.values) {
            for (a, v) in acc.iter_mut().zip(img.values()) {
                *a += db * v;
            }
        }
        RealField::new(self.grid(), acc)
    }

    /// `D(x) = Σ_k (Φe_k)(x)²`.
    pub fn diffusion_intensity(&self) -> RealField {
        let mut acc = vec![0.0; self.grid().points()];
        for img in &self.basis_images {
            for (a, v) in acc.iter_mut().zip(img.values()) {
                *a += v * v;
            }
        }
        RealField::from_raw(self.grid(), acc)
    }

    fn check_increment(&self, inc: &WienerIncrement) -> Result<()> {
        if inc.values.len() != self.basis_size() {
            return invalid(format!(
                "increment has {} entries, operator has {} basis functions",
                inc.values.len(),
                self.basis_size()
            ));
        }
        Ok(())
    }
}

/// Gaussian increments `Δβ_k ~ N(0, dt)` for one step of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub values: Vec<f64>,
    pub dt: f64,
    pub step_index: u64,
    pub lineage: SeedLineage,
}

impl WienerIncrement {
    pub fn draw(lineage: SeedLineage, step_index: u64, dt: f64, basis_size: usize) -> Result<Self> {
        let mut rng = lineage.rng(step_index);
        let values = sample_increment(&mut rng, dt, basis_size)?;
        Ok(Self { values, dt, step_index, lineage })
    }

    pub fn zero(lineage: SeedLineage, step_index: u64, dt: f64, basis_size: usize) -> Self {
        Self { values: vec![0.0; basis_size], dt, step_index, lineage }
    }
}

/// `basis_size` i.i.d. `N(0, dt)` draws.
pub fn sample_increment(rng: &mut impl Rng, dt: f64, basis_size: usize) -> Result<Vec<f64>> {
    ensure_finite("dt", dt)?;
    if dt <= 0.0 {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    let sd = dt.sqrt();
    Ok((0..basis_size).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// The noise path of one channel of one path: increments are a pure function of the step index.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    pub lineage: SeedLineage,
    pub dt: f64,
    pub basis_size: usize,
    /// When false every increment is zero.
    pub active: bool,
}

impl NoiseStream {
    pub fn increment(&self, step_index: u64) -> Result<WienerIncrement> {
        if self.active {
            WienerIncrement::draw(self.lineage, step_index, self.dt, self.basis_size)
        } else {
            Ok(WienerIncrement::zero(self.lineage, step_index, self.dt, self.basis_size))
        }
    }
}

/// Which function of `u` multiplies the Schrödinger noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FChoice {
    #[default]
    U,
    Conj,
    Re,
    Im,
}

impl FChoice {
    pub fn apply(self, u: Complex64) -> Complex64 {
        match self {
            FChoice::U => u,
            FChoice::Conj => u.conj(),
            FChoice::Re => Complex64::new(u.re, 0.0),
            FChoice::Im => Complex64::new(u.im, 0.0),
        }
    }
}

fn check_alpha(alpha: u32) -> Result<()> {
    if alpha < 1 {
        return invalid("noise exponent alpha must be >= 1");
    }
    Ok(())
}

/// `F(u)^α · ξ` for an already realized noise field `ξ`.
pub fn multiply_schrodinger(u: &ComplexField, noise: &RealField, alpha: u32, f: FChoice) -> Result<ComplexField> {
    check_alpha(alpha)?;
    u.same_grid(noise)?;
    let values = u
        .values()
        .iter()
        .zip(noise.values())
        .map(|(&z, &n)| f.apply(z).powu(alpha) * n)
        .collect();
    Ok(ComplexField::from_raw(u.grid(), values))
}

/// `w^α · ξ` for an already realized noise field `ξ`.
pub fn multiply_kdv(w: &RealField, noise: &RealField, alpha: u32) -> Result<RealField> {
    check_alpha(alpha)?;
    w.same_grid(noise)?;
    let values = w
        .values()
        .iter()
        .zip(noise.values())
        .map(|(&a, &n)| a.powi(alpha as i32) * n)
        .collect();
    Ok(RealField::from_raw(w.grid(), values))
}

/// `F(u)^α · Σ_k (Φe_k)Δβ_k`; with `inner_projection = Some(m)` the noise is `P_mΦ dW`.
pub fn noise_term_schrodinger(
    u: &ComplexField,
    op: &NoiseOperator,
    inc: &WienerIncrement,
    alpha: u32,
    f: FChoice,
    inner_projection: Option<f64>,
) -> Result<ComplexField> {
    check_alpha(alpha)?;
    let mut noise = op.realize(inc)?;
    if let Some(m) = inner_projection {
        noise = project_low(&noise, m)?;
    }
    multiply_schrodinger(u, &noise, alpha, f)
}

/// `w^α · Σ_k (Ψe_k)Δβ_k`, followed by `P_m` when `projection_m` is set.
pub fn noise_term_kdv(
    w: &RealField,
    op: &NoiseOperator,
    inc: &WienerIncrement,
    alpha: u32,
    projection_m: Option<f64>,
) -> Result<RealField> {
    check_alpha(alpha)?;
    let noise = op.realize(inc)?;
    let term = multiply_kdv(w, &noise, alpha)?;
    match projection_m {
        Some(m) => project_low(&term, m),
        None => Ok(term),
    }
}
