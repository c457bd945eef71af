//! Randomized numerical probes of the multilinear space-time estimates, the Duhamel gain in `T`
//! and the norm localization.
//!
//! Every probe evaluates the same continuum inputs on a coarse and on a refined lattice. The
//! discrete lattice carries a grid-dependent bias, so only the stability of the maximal ratio
//! under refinement is asserted, never a constant.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{restricted_norm, running_norms, spacetime_norm, BourgainWeight};
use crate::cutoffs::{localize_by_norm, SmoothCutoff};
use crate::dynamics::duhamel_schrodinger;
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::rng::{stream, Channel};
use crate::spectral::{derivative, sobolev_norm, ComplexField, Grid1D, SpaceTimeField, SpectralField};

/// Sampling of the probe inputs. The refined grid halves `dx` and `dt` and keeps the mode band,
/// so both grids see the same continuum functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub points: usize,
    pub timesteps: usize,
    pub length: f64,
    pub duration: f64,
    /// Largest mode index `|j|` of the random inputs.
    pub band: usize,
}

impl ProbeGrid {
    pub fn coarse() -> Self {
        Self { points: 128, timesteps: 128, length: 16.0 * PI, duration: 4.0, band: 21 }
    }

    pub fn refined(&self) -> Self {
        Self { points: 2 * self.points, timesteps: 2 * self.timesteps, ..*self }
    }

    pub fn with_band(self, band: usize) -> Self {
        Self { band, ..self }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.points)
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.timesteps as f64
    }
}

/// Which dispersion the random input is aligned with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Complex, concentrated near `τ = -ξ²`.
    Schrodinger,
    /// Real, concentrated near `τ = ξ³`.
    Kdv,
}

/// Spread of the random modulation frequencies around the dispersion curve.
const MODULATION_SPREAD: f64 = 2.0;

/// `C²` window: zero on the first and last 10% of `[0, 1]`, quintic ramps up to 35% and from 65%.
pub fn time_window(s: f64) -> f64 {
    let up = (s - 0.1) / 0.25;
    let down = (0.9 - s) / 0.25;
    let ramp = |r: f64| SmoothCutoff.eval(2.0 - r.clamp(0.0, 1.0));
    ramp(up).min(ramp(down))
}

/// Random band-limited, time-windowed input: modes `|j| ≤ band` with complex Gaussian
/// coefficients damped by `(1+|ξ|)^{-1}` and modulation offsets in `±2`.
pub fn random_input(kind: InputKind, seed: u64, probe: &ProbeGrid) -> Result<SpaceTimeField> {
    let grid = probe.grid()?;
    let n = grid.points();
    if 2 * probe.band >= n {
        return invalid("mode band exceeds the grid");
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let band = probe.band as i64;
    let modes: Vec<(i64, Complex64, f64)> = (-band..=band)
        .map(|j| {
            let xi = 2.0 * PI * j as f64 / probe.length;
            let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) / (1.0 + xi.abs());
            let omega = rng.gen_range(-MODULATION_SPREAD..MODULATION_SPREAD);
            let tau = match kind {
                InputKind::Schrodinger => -xi * xi,
                InputKind::Kdv => xi * xi * xi,
            };
            (j, c, tau + omega)
        })
        .collect();
    let dt = probe.dt();
    let mut values = Vec::with_capacity(n * probe.timesteps);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..probe.timesteps {
        let t = k as f64 * dt;
        let eta = time_window(t / probe.duration) * n as f64;
        for &(j, c, tau) in &modes {
            let slot = if j >= 0 { j as usize } else { (n as i64 + j) as usize };
            spec[slot] = c * Complex64::from_polar(eta, tau * t);
        }
        let slice = grid.inverse(&spec);
        match kind {
            InputKind::Schrodinger => values.extend(slice),
            InputKind::Kdv => values.extend(slice.iter().map(|z| Complex64::new(z.re, 0.0))),
        }
    }
    SpaceTimeField::new(&grid, dt, values)
}

/// Outcome of one probe at two resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub lemma: String,
    pub a: f64,
    pub b: f64,
    pub trials: usize,
    pub max_ratio_coarse: f64,
    pub max_ratio_refined: f64,
    /// `max_ratio_refined ≤ 2·max_ratio_coarse`.
    pub stable: bool,
}

impl ProbeReport {
    fn new(lemma: impl Into<String>, a: f64, b: f64, trials: usize, coarse: f64, refined: f64) -> Self {
        Self {
            lemma: lemma.into(),
            a,
            b,
            trials,
            max_ratio_coarse: coarse,
            max_ratio_refined: refined,
            stable: refined <= 2.0 * coarse,
        }
    }
}

fn trial_seed(seed: u64, trial: usize, slot: u64) -> u64 {
    stream(seed, trial as u64, Channel::Probe as u64, slot).gen()
}

/// Max of `ratio` over trials; `None` marks an excluded (zero-denominator) trial.
fn max_ratio<F>(probe: &ProbeGrid, trials: usize, ratio: &F) -> Result<f64>
where
    F: Fn(&ProbeGrid, usize) -> Result<Option<f64>> + Sync,
{
    let ratios: Vec<Option<f64>> = (0..trials).into_par_iter().map(|i| ratio(probe, i)).collect::<Result<_>>()?;
    Ok(ratios.into_iter().flatten().fold(0.0, f64::max))
}

fn run_probe<F>(lemma: &str, a: f64, b: f64, trials: usize, probe: ProbeGrid, ratio: F) -> Result<ProbeReport>
where
    F: Fn(&ProbeGrid, usize) -> Result<Option<f64>> + Sync,
{
    if trials == 0 {
        return invalid("a probe needs at least one trial");
    }
    let coarse = max_ratio(&probe, trials, &ratio)?;
    let refined = max_ratio(&probe.refined(), trials, &ratio)?;
    Ok(ProbeReport::new(lemma, a, b, trials, coarse, refined))
}

fn quotient(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn check_open(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    ensure_finite(name, v)?;
    if v <= lo || v >= hi {
        return invalid(format!("{name} = {v} must lie in ({lo}, {hi})"));
    }
    Ok(())
}

fn check_quarter_half(a: f64, b: f64) -> Result<()> {
    check_open("a", a, 0.25, 0.5)?;
    check_open("b", b, 0.25, 0.5)
}

/// `∫ ⟨x-α⟩^{-2a} ⟨x-β⟩^{-2b} dx` with `⟨y⟩ = 1 + |y|`, by double-exponential quadrature on
/// `[min, max]` and on the two tails mapped to `[0, 1)`.
pub fn basic_inequality_integral(a: f64, b: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_quarter_half(a, b)?;
    ensure_finite("alpha", alpha)?;
    ensure_finite("beta", beta)?;
    let f = |x: f64| (1.0 + (x - alpha).abs()).powf(-2.0 * a) * (1.0 + (x - beta).abs()).powf(-2.0 * b);
    let (lo, hi) = (alpha.min(beta), alpha.max(beta));
    let tol = 1e-13;
    let middle = if hi > lo { quadrature::double_exponential::integrate(f, lo, hi, tol).integral } else { 0.0 };
    let tail = |sign: f64, edge: f64| {
        quadrature::double_exponential::integrate(
            |y: f64| {
                let s = 1.0 - y;
                f(edge + sign * y / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        )
        .integral
    };
    Ok(middle + tail(1.0, hi) + tail(-1.0, lo))
}

/// Integral divided by `⟨α-β⟩^{1-2a-2b}`.
pub fn probe_basic_inequality(a: f64, b: f64, alpha: f64, beta: f64) -> Result<f64> {
    let integral = basic_inequality_integral(a, b, alpha, beta)?;
    Ok(integral / (1.0 + (alpha - beta).abs()).powf(1.0 - 2.0 * a - 2.0 * b))
}

/// `‖gh‖_{X_{-a,1}} / (‖g‖_{X_{b,1}} ‖h‖_{Y_{b,1}})`.
pub fn probe_bilinear_schrodinger(a: f64, b: f64, trials: usize, seed: u64) -> Result<ProbeReport> {
    check_quarter_half(a, b)?;
    if a + 2.0 * b <= 1.0 {
        return invalid("the bilinear Schrödinger estimate needs a + 2b > 1");
    }
    let (target, xw, yw) = (BourgainWeight::x(-a, 1.0)?, BourgainWeight::x(b, 1.0)?, BourgainWeight::y(b, 1.0)?);
    run_probe("bilinear_schrodinger", a, b, trials, ProbeGrid::coarse(), |p, i| {
        let g = random_input(InputKind::Schrodinger, trial_seed(seed, i, 0), p)?;
        let h = random_input(InputKind::Kdv, trial_seed(seed, i, 1), p)?;
        bilinear_ratio(&g, &h, &target, &xw, &yw)
    })
}

fn bilinear_ratio(
    g: &SpaceTimeField,
    h: &SpaceTimeField,
    target: &BourgainWeight,
    gw: &BourgainWeight,
    hw: &BourgainWeight,
) -> Result<Option<f64>> {
    let gh = g.zip_with(h, |x, y| x * y)?;
    Ok(quotient(spacetime_norm(&gh, target)?, spacetime_norm(g, gw)? * spacetime_norm(h, hw)?))
}

/// `‖|u|²u‖_{X_{-a,1}} / ‖u‖³_{X_{b,1}}`.
pub fn probe_trilinear(a: f64, b: f64, trials: usize, seed: u64) -> Result<ProbeReport> {
    check_open("a", a, 0.375, 0.5)?;
    check_open("b", b, 0.375, 0.5)?;
    let (target, xw) = (BourgainWeight::x(-a, 1.0)?, BourgainWeight::x(b, 1.0)?);
    run_probe("trilinear", a, b, trials, ProbeGrid::coarse(), |p, i| trilinear_ratio(&random_input(InputKind::Schrodinger, trial_seed(seed, i, 0), p)?, &target, &xw))
}

fn trilinear_ratio(u: &SpaceTimeField, target: &BourgainWeight, xw: &BourgainWeight) -> Result<Option<f64>> {
    let cubic = u.map(|z| z.norm_sqr() * z);
    Ok(quotient(spacetime_norm(&cubic, target)?, spacetime_norm(u, xw)?.powi(3)))
}

/// `‖∂x(g h̄)‖_{Y_{-a,1}}` (or `Y_{-a,1,-3/8}` when `weighted`) over `‖g‖_{X_{b,1}} ‖h‖_{X_{b,1}}`.
pub fn probe_bilinear_kdv(a: f64, b: f64, weighted: bool, trials: usize, seed: u64) -> Result<ProbeReport> {
    check_open("a", a, 0.25, 0.5)?;
    check_open("b", b, 1.0 / 3.0, 0.5)?;
    if a + 2.0 * b <= 4.0 / 3.0 {
        return invalid("the bilinear KdV estimate needs a + 2b > 4/3");
    }
    let target = if weighted { BourgainWeight::y_homogeneous(-a, 1.0)? } else { BourgainWeight::y(-a, 1.0)? };
    let xw = BourgainWeight::x(b, 1.0)?;
    let id = if weighted { "bilinear_kdv_weighted" } else { "bilinear_kdv" };
    run_probe(id, a, b, trials, ProbeGrid::coarse(), |p, i| {
        let g = random_input(InputKind::Schrodinger, trial_seed(seed, i, 0), p)?;
        let h = random_input(InputKind::Schrodinger, trial_seed(seed, i, 1), p)?;
        bilinear_kdv_ratio(&g, &h, &target, &xw)
    })
}

fn bilinear_kdv_ratio(
    g: &SpaceTimeField,
    h: &SpaceTimeField,
    target: &BourgainWeight,
    xw: &BourgainWeight,
) -> Result<Option<f64>> {
    let flux = g.zip_with(h, |x, y| x * y.conj())?.map_slices(derivative);
    Ok(quotient(spacetime_norm(&flux, target)?, spacetime_norm(g, xw)? * spacetime_norm(h, xw)?))
}

/// `(1/2 - 1/(4(α-1))) ∨ 3/8`; `3/8` for `α = 1`.
pub fn b_alpha(alpha: u32) -> f64 {
    if alpha <= 1 {
        return 0.375;
    }
    (0.5 - 1.0 / (4.0 * (alpha as f64 - 1.0))).max(0.375)
}

/// `‖u^α‖_{X^T_{0,1}} / ‖u‖^α_{X^T_{b,1}}` over the full span. The mode band is narrowed to
/// `N/(2α)` on the coarse grid so the power stays unaliased.
pub fn probe_power(alpha: u32, b: f64, trials: usize, seed: u64) -> Result<ProbeReport> {
    if !(2..=4).contains(&alpha) {
        return invalid(format!("power probe supports alpha in {{2, 3, 4}}, got {alpha}"));
    }
    ensure_finite("b", b)?;
    if b <= b_alpha(alpha) || b >= 0.5 {
        return invalid(format!("b = {b} must lie in (b_alpha, 1/2) = ({}, 0.5)", b_alpha(alpha)));
    }
    let coarse = ProbeGrid::coarse();
    let probe = coarse.with_band(coarse.band.min(coarse.points / (2 * alpha as usize)));
    let (target, xw) = (BourgainWeight::x(0.0, 1.0)?, BourgainWeight::x(b, 1.0)?);
    run_probe(&format!("power_{alpha}"), 0.0, b, trials, probe, |p, i| {
        let u = random_input(InputKind::Schrodinger, trial_seed(seed, i, 0), p)?;
        let power = u.map(|z| z.powu(alpha));
        let t = u.span();
        Ok(quotient(restricted_norm(&power, t, &target)?, restricted_norm(&u, t, &xw)?.powi(alpha as i32)))
    })
}

/// `max_t ‖F(t)‖_{H¹} / ‖F‖_{X_{b',1}}` for `b' > 1/2`.
pub fn probe_embedding(b_prime: f64, trials: usize, seed: u64) -> Result<ProbeReport> {
    check_open("b'", b_prime, 0.5, 1.0)?;
    let xw = BourgainWeight::x(b_prime, 1.0)?;
    run_probe("embedding", 0.0, b_prime, trials, ProbeGrid::coarse(), |p, i| {
        let f = random_input(InputKind::Schrodinger, trial_seed(seed, i, 0), p)?;
        let sup = (0..f.timesteps())
            .map(|k| sobolev_norm(&f.slice_field(k), 1.0, None))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(quotient(sup, spacetime_norm(&f, &xw)?))
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("slope fit needs at least two matching points");
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return invalid("slope fit needs positive finite values");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Time-scaling of the Duhamel operator in restricted norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelReport {
    pub a: f64,
    pub b: f64,
    pub times: Vec<f64>,
    /// Mean over trials of `g(T)` at each `T`.
    pub mean_ratios: Vec<f64>,
    /// Mean of the per-trial log-log slopes.
    pub slope: f64,
    pub expected_slope: f64,
    pub trials: usize,
}

/// Samples per restriction window in the Duhamel probe.
pub const DUHAMEL_SAMPLES: usize = 64;

/// `g(T) = ‖∫₀ᵗ S(t-s)f(s)ds‖_{X^T_{b,1}} / ‖f‖_{X^T_{-a,1}}` for `f = S(t)f₀·m(t)` with random
/// band-limited `f₀` and a slowly varying random modulation `m`, and its log-log slope in `T`.
pub fn probe_duhamel_gain(a: f64, b: f64, times: &[f64], trials: usize, seed: u64) -> Result<DuhamelReport> {
    check_open("a", a, 0.0, 1.0)?;
    check_open("b", b, 0.0, 0.5)?;
    if a + b >= 1.0 {
        return invalid("the Duhamel gain needs a + b < 1");
    }
    if times.len() < 2 || times.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return invalid("the Duhamel probe needs at least two times in (0, 1]");
    }
    if trials == 0 {
        return invalid("a probe needs at least one trial");
    }
    let grid = Grid1D::new(16.0 * PI, 128)?;
    let (xb, xa) = (BourgainWeight::x(b, 1.0)?, BourgainWeight::x(-a, 1.0)?);
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64, Channel::Probe as u64, 0);
            let f0 = random_profile(&grid, &mut rng, 21);
            let (m1, w1, p1) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0 * PI));
            times
                .iter()
                .map(|&t_end| {
                    let dt = t_end / DUHAMEL_SAMPLES as f64;
                    let slices: Vec<ComplexField> = (0..DUHAMEL_SAMPLES)
                        .map(|k| {
                            let t = k as f64 * dt;
                            let m = 1.0 + m1 * (w1 * t + p1).cos();
                            crate::spectral::schrodinger_propagate(&f0, t).map(|s| s.scale(Complex64::new(m, 0.0)))
                        })
                        .collect::<Result<_>>()?;
                    let f = SpaceTimeField::from_slices(dt, &slices)?;
                    let d = duhamel_schrodinger(&f)?;
                    quotient(restricted_norm(&d, t_end, &xb)?, restricted_norm(&f, t_end, &xa)?)
                        .ok_or_else(|| Error::Precondition("zero forcing".into()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = per_trial.iter().map(|r| loglog_slope(times, r)).collect::<Result<_>>()?;
    let mean_ratios = (0..times.len()).map(|j| per_trial.iter().map(|r| r[j]).sum::<f64>() / trials as f64).collect();
    Ok(DuhamelReport {
        a,
        b,
        times: times.to_vec(),
        mean_ratios,
        slope: slopes.iter().sum::<f64>() / trials as f64,
        expected_slope: 1.0 - (a + b),
        trials,
    })
}

/// Random spatial profile with modes `|j| ≤ band` and `(1+|ξ|)^{-1}`-damped Gaussian coefficients.
pub(crate) fn random_profile(grid: &Grid1D, rng: &mut impl Rng, band: usize) -> ComplexField {
    let n = grid.points();
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for j in -(band as i64)..=band as i64 {
        let xi = 2.0 * PI * j as f64 / grid.length();
        let slot = if j >= 0 { j as usize } else { (n as i64 + j) as usize };
        spec[slot] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * (n as f64 / (1.0 + xi.abs()));
    }
    ComplexField::from_spectrum(grid, &spec)
}

/// Empirical constants of the norm localization `ũ = θ_R(‖u‖_{X^t_{b,1}})u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub b: f64,
    pub r: f64,
    pub trials: usize,
    /// `max ‖ũ‖_{X^T_{b,1}} / R`.
    pub bound_coarse: f64,
    pub bound_refined: f64,
    /// `max ‖ũ¹ - ũ²‖ / ‖u¹ - u²‖`.
    pub lipschitz_coarse: f64,
    pub lipschitz_refined: f64,
    pub stable: bool,
}

/// Random inputs scaled so their full running norm is `λR`, `λ ∈ [0.5, 4]`; the Lipschitz
/// partner adds a 10% perturbation.
pub fn probe_localization(b: f64, r: f64, trials: usize, seed: u64) -> Result<LocalizationReport> {
    check_open("b", b, 0.0, 0.5)?;
    ensure_finite("R", r)?;
    if r <= 0.0 {
        return invalid("R must be positive");
    }
    if trials == 0 {
        return invalid("a probe needs at least one trial");
    }
    let xw = BourgainWeight::x(b, 1.0)?;
    let eval = |p: &ProbeGrid, i: usize| -> Result<(f64, f64)> {
        let mut rng = stream(seed, i as u64, Channel::Probe as u64, 7);
        let lambda = rng.gen_range(0.5..4.0);
        let u1 = random_input(InputKind::Schrodinger, trial_seed(seed, i, 0), p)?;
        let full = running_norms(&u1, &xw)?.1.last().copied().unwrap_or(0.0);
        let u1 = u1.map(|z| z * (lambda * r / full));
        let bump = random_input(InputKind::Schrodinger, trial_seed(seed, i, 1), p)?;
        let bump_size = running_norms(&bump, &xw)?.1.last().copied().unwrap_or(0.0);
        let u2 = u1.zip_with(&bump, |x, y| x + y * (0.1 * lambda * r / bump_size))?;
        let localize = |u: &SpaceTimeField| -> Result<SpaceTimeField> {
            let (_, env) = running_norms(u, &xw)?;
            localize_by_norm(&env, u, r)
        };
        let (l1, l2) = (localize(&u1)?, localize(&u2)?);
        let t = u1.span();
        let bound = restricted_norm(&l1, t, &xw)? / r;
        let diff_in = restricted_norm(&u1.zip_with(&u2, |x, y| x - y)?, t, &xw)?;
        let diff_out = restricted_norm(&l1.zip_with(&l2, |x, y| x - y)?, t, &xw)?;
        Ok((bound, diff_out / diff_in))
    };
    let maxes = |p: ProbeGrid| -> Result<(f64, f64)> {
        let v: Vec<(f64, f64)> = (0..trials).into_par_iter().map(|i| eval(&p, i)).collect::<Result<_>>()?;
        Ok(v.into_iter().fold((0.0, 0.0), |acc, x| (acc.0.max(x.0), acc.1.max(x.1))))
    };
    let coarse = ProbeGrid::coarse();
    let (bc, lc) = maxes(coarse)?;
    let (br, lr) = maxes(coarse.refined())?;
    Ok(LocalizationReport {
        b,
        r,
        trials,
        bound_coarse: bc,
        bound_refined: br,
        lipschitz_coarse: lc,
        lipschitz_refined: lr,
        stable: br <= 2.0 * bc && lr <= 2.0 * lc,
    })
}
