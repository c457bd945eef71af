//! Conserved quantities, the Lyapunov combination `Q`, mixed space-time norms and the
//! moment oracles used by the Monte Carlo checks.

use serde::{Deserialize, Serialize};

use crate::cutoffs::TruncationFamily;
use crate::dynamics::SystemParams;
use crate::error::{invalid, Result};
use crate::noise::FChoice;
use crate::spectral::{derivative, ComplexField, RealField, SpaceTimeField, SpectralField};

/// `dx·Σ|u|²`.
pub fn mass(u: &ComplexField) -> f64 {
    u.values().iter().map(|c| c.norm_sqr()).sum::<f64>() * u.grid().dx()
}

/// `∫ Im(u ∂x ū) + ½w² dx`.
pub fn momentum(u: &ComplexField, w: &RealField) -> Result<f64> {
    let p = SystemParams::default();
    Ok(ConservedTriple::evaluate(u, w, &TruncationFamily::inactive(), &p)?.momentum)
}

/// `∫ |∂x u|² + ½(|∂x w|² - ψ_{2,K}(w)) + φ_K(|u|²)|u|²w + ψ_{1,K}(|u|²) dx`.
pub fn energy(u: &ComplexField, w: &RealField, fam: &TruncationFamily) -> Result<f64> {
    Ok(ConservedTriple::evaluate(u, w, fam, &SystemParams::default())?.energy)
}

/// Mass, momentum and energy of one snapshot.
///
/// For general coefficients the KdV parts carry the weight `c = γ₁/(2γ₂)`, the coupling `γ₁`,
/// the quartic term `β` and the cubic term the Burgers coefficient; at unit coefficients this is
/// [`momentum`] and [`energy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedTriple {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

impl ConservedTriple {
    pub fn evaluate(u: &ComplexField, w: &RealField, fam: &TruncationFamily, params: &SystemParams) -> Result<Self> {
        u.same_grid(w)?;
        let dx = u.grid().dx();
        let c = 0.5 * params.kdv_weight();
        let ux = derivative(u);
        let wx = derivative(w);
        let mut momentum = 0.0;
        let mut energy = 0.0;
        for n in 0..u.values().len() {
            let (z, zx) = (u.values()[n], ux.values()[n]);
            let (wv, wxv) = (w.values()[n], wx.values()[n]);
            let rho = z.norm_sqr();
            momentum += (z * zx.conj()).im + c * wv * wv;
            energy += zx.norm_sqr()
                + c * (wxv * wxv - params.burgers * fam.psi2(wv))
                + params.gamma1 * fam.phi(rho) * rho * wv
                + params.beta * fam.psi1(rho);
        }
        Ok(Self { mass: mass(u), momentum: momentum * dx, energy: energy * dx })
    }
}

/// `Q = ‖u‖² + ‖u‖¹⁰ + |I| + |I|^{5/3} + |E|` with `‖·‖` the `L²` norm.
pub fn lyapunov_q(u: &ComplexField, w: &RealField, fam: &TruncationFamily) -> Result<f64> {
    let t = ConservedTriple::evaluate(u, w, fam, &SystemParams::default())?;
    let i = t.momentum.abs();
    Ok(t.mass + t.mass.powi(5) + i + i.powf(5.0 / 3.0) + t.energy.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    /// `L^r_x L^q_t`: time norm inside, space norm outside.
    SpaceOuter,
    /// `L^q_t L^r_x`.
    TimeOuter,
}

fn lp(values: impl Iterator<Item = f64>, p: f64, weight: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (values.map(|v| v.powf(p)).sum::<f64>() * weight).powf(1.0 / p)
    }
}

/// Nested Riemann-sum norm with time exponent `q` and space exponent `r`; `∞` is the discrete max.
pub fn mixed_norm(f: &SpaceTimeField, q: f64, r: f64, order: NormOrder) -> Result<f64> {
    for (name, p) in [("q", q), ("r", r)] {
        if p.is_nan() || p <= 0.0 {
            return invalid(format!("exponent {name} must lie in (0, ∞], got {p}"));
        }
    }
    let (n, nt) = (f.grid().points(), f.timesteps());
    let (dx, dt) = (f.grid().dx(), f.dt());
    let at = |k: usize, i: usize| f.values()[k * n + i].norm();
    Ok(match order {
        NormOrder::SpaceOuter => {
            let inner: Vec<f64> = (0..n).map(|i| lp((0..nt).map(|k| at(k, i)), q, dt)).collect();
            lp(inner.into_iter(), r, dx)
        }
        NormOrder::TimeOuter => {
            let inner: Vec<f64> = (0..nt).map(|k| lp((0..n).map(|i| at(k, i)), r, dx)).collect();
            lp(inner.into_iter(), q, dt)
        }
    })
}

/// Relative spread allowed in the diffusion intensity for the mass-drift oracle.
pub const CONSTANT_INTENSITY_TOLERANCE: f64 = 1e-4;

/// Predicted `E‖u(t)‖²_{L²} = ‖u₀‖² e^{D₀t}` for `α = 1`, `F(u) = u`.
///
/// By the Itô formula the drift of `‖u‖²` is `Σ_k ‖uΦe_k‖² = ∫|u|²D`, the nonlinear drift is a
/// pointwise phase rotation and the martingale part has zero mean; with `D ≡ D₀` this closes.
pub fn mass_drift_oracle(
    initial_mass: f64,
    intensity: &RealField,
    params: &SystemParams,
    times: &[f64],
) -> Result<Vec<f64>> {
    if params.alpha != 1 || params.f_choice != FChoice::U {
        return invalid("the mass-drift oracle needs alpha = 1 and F(u) = u");
    }
    let d0 = constant_intensity(intensity)?;
    Ok(times.iter().map(|t| initial_mass * (d0 * t).exp()).collect())
}

/// The value `D₀` of a spatially constant intensity.
pub fn constant_intensity(intensity: &RealField) -> Result<f64> {
    let v = intensity.values();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let spread = v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    if spread > CONSTANT_INTENSITY_TOLERANCE * mean.abs().max(f64::MIN_POSITIVE) && spread > 0.0 {
        return invalid(format!("diffusion intensity is not spatially constant (relative spread {:.3e})", spread / mean.abs()));
    }
    Ok(mean)
}

/// Per-checkpoint sample means with standard errors `√(sample variance / M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub order: u32,
    pub paths: usize,
}

impl MomentSeries {
    /// `samples[p][i]` is path `p` at checkpoint `i`.
    pub fn from_samples(times: Vec<f64>, samples: &[Vec<f64>], order: u32) -> Result<Self> {
        let m = samples.len();
        if m == 0 {
            return Ok(Self { estimates: vec![0.0; times.len()], std_errors: vec![0.0; times.len()], times, order, paths: 0 });
        }
        if samples.iter().any(|s| s.len() != times.len()) {
            return invalid("every path needs one sample per checkpoint");
        }
        let mut estimates = Vec::with_capacity(times.len());
        let mut std_errors = Vec::with_capacity(times.len());
        for i in 0..times.len() {
            let mean = samples.iter().map(|s| s[i]).sum::<f64>() / m as f64;
            let var = if m > 1 {
                samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (m - 1) as f64
            } else {
                0.0
            };
            estimates.push(mean);
            std_errors.push((var / m as f64).sqrt());
        }
        Ok(Self { times, estimates, std_errors, order, paths: m })
    }
}
