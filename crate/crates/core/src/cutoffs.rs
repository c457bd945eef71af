//! Smooth cutoffs `θ`, `θ_R`, the amplitude truncations `φ_K`, `ψ_K`, `ψ_{1,K}`, `ψ_{2,K}`,
//! and norm-driven localization of a space-time field.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::spectral::SpaceTimeField;

/// Quintic smoothstep `6y⁵ - 15y⁴ + 10y³` on `[0,1]`.
fn smoothstep(y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    y * y * y * (10.0 + y * (-15.0 + 6.0 * y))
}

fn smoothstep_derivative(y: f64) -> f64 {
    if !(0.0..=1.0).contains(&y) {
        return 0.0;
    }
    30.0 * y * y * (1.0 - y) * (1.0 - y)
}

/// Even C² profile: 1 on `[-1,1]`, 0 outside `[-2,2]`, quintic transition in between.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmoothCutoff;

impl SmoothCutoff {
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 {
            1.0
        } else if a >= 2.0 {
            0.0
        } else {
            1.0 - smoothstep(a - 1.0)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        -smoothstep_derivative(t.abs() - 1.0) * t.signum()
    }
}

/// `θ(x/R)`; `R = ∞` gives 1.
pub fn theta_r(x: f64, r: f64) -> Result<f64> {
    if r.is_nan() || r <= 0.0 {
        return invalid(format!("cutoff radius must be positive, got {r}"));
    }
    if r.is_infinite() {
        return Ok(1.0);
    }
    Ok(SmoothCutoff.eval(x / r))
}

/// Member of the amplitude-truncation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Phi,
    Psi,
    Psi1,
    Psi2,
}

/// Gauss–Legendre nodes/weights on [-1,1], 5 points (exact through degree 9).
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// `φ_K(x) = φ(x/K)` and its companions. `K = ∞` switches all truncation off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationFamily {
    k: f64,
}

impl TruncationFamily {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_nan() || k <= 0.0 {
            return invalid(format!("truncation level must be positive, got {k}"));
        }
        Ok(Self { k })
    }

    pub fn inactive() -> Self {
        Self { k: f64::INFINITY }
    }

    pub fn level(&self) -> f64 {
        self.k
    }

    pub fn is_inactive(&self) -> bool {
        self.k.is_infinite()
    }

    pub fn phi(&self, x: f64) -> f64 {
        if self.is_inactive() {
            1.0
        } else {
            SmoothCutoff.eval(x / self.k)
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        if self.is_inactive() {
            0.0
        } else {
            SmoothCutoff.derivative(x / self.k) / self.k
        }
    }

    /// `xφ_K'(x) + φ_K(x)`.
    pub fn psi(&self, x: f64) -> f64 {
        x * self.dphi(x) + self.phi(x)
    }

    /// `∫₀ˣ sφ_K(s) ds`.
    pub fn psi1(&self, x: f64) -> f64 {
        self.moment(x, 1)
    }

    /// `∫₀ˣ s²φ_K(s) ds`.
    pub fn psi2(&self, x: f64) -> f64 {
        self.moment(x, 2)
    }

    pub fn eval(&self, which: Which, x: f64) -> f64 {
        match which {
            Which::Phi => self.phi(x),
            Which::Psi => self.psi(x),
            Which::Psi1 => self.psi1(x),
            Which::Psi2 => self.psi2(x),
        }
    }

    /// `∫₀ˣ s^p φ_K(s) ds`. On the plateau this is `x^{p+1}/(p+1)`; through the transition band
    /// the integrand is a polynomial of degree ≤ 7, so five-point Gauss–Legendre is exact.
    fn moment(&self, x: f64, p: i32) -> f64 {
        let a = x.abs();
        let parity = if p % 2 == 0 { x.signum() } else { 1.0 };
        let plateau = |y: f64| y.powi(p + 1) / (p + 1) as f64;
        if self.is_inactive() || a <= self.k {
            return parity * plateau(a);
        }
        let upper = a.min(2.0 * self.k);
        let (lo, hi) = (self.k, upper);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let band: f64 = GL5
            .iter()
            .map(|&(node, weight)| {
                let s = mid + half * node;
                weight * s.powi(p) * self.phi(s)
            })
            .sum::<f64>()
            * half;
        parity * (plateau(self.k) + band)
    }
}

/// `ψ_family(x)` by name.
pub fn psi_family_eval(fam: &TruncationFamily, which: Which, x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(fam.eval(which, x))
}

/// Multiplies time slice `k` of `u` by `θ_R(history[k])`.
///
/// `history` must be nondecreasing; a decrease signals a broken running-norm computation.
pub fn localize_by_norm(history: &[f64], u: &SpaceTimeField, r: f64) -> Result<SpaceTimeField> {
    if history.len() != u.timesteps() {
        return invalid(format!(
            "norm history has {} samples, field has {} time slices",
            history.len(),
            u.timesteps()
        ));
    }
    check_nondecreasing(history)?;
    let factors = history.iter().map(|&h| theta_r(h, r)).collect::<Result<Vec<_>>>()?;
    Ok(u.scale_slices(&factors))
}

pub(crate) fn check_nondecreasing(history: &[f64]) -> Result<()> {
    for (k, pair) in history.windows(2).enumerate() {
        if pair[1] < pair[0] - 1e-12 * pair[0].abs().max(1.0) {
            return Err(Error::Internal(format!(
                "running norm decreased at sample {}: {} -> {}",
                k + 1,
                pair[0],
                pair[1]
            )));
        }
    }
    Ok(())
}
