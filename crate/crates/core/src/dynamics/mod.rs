//! Time integration of the coupled system and of its approximation hierarchy,
//! the Picard map of the fixed-point argument, and stopping-time tracking.

mod drift;
mod picard;
mod stepper;
mod stopping;

pub use drift::{drift_approx, drift_kdv, drift_schrodinger, DriftSpec};
pub use picard::{
    contraction_factor, duhamel_airy, duhamel_schrodinger, pair_distance, picard_apply, stochastic_convolution,
    FieldPair, NoisePath, PicardSetup, HALVING_TOLERANCE,
};
pub use stepper::{prepare_initial, Localization, Noise, Stepper, BLOWUP_H1};
pub use stopping::StoppingTracker;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};
use crate::noise::FChoice;
use crate::spectral::{ComplexField, RealField, SpectralField};

/// Physical constants of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub alpha: u32,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Coefficient of the KdV self-interaction `-½∂x(w²)`; 1 in the system, 0 in the linear limit.
    pub burgers: f64,
    pub f_choice: FChoice,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { alpha: 1, beta: 1.0, gamma1: 1.0, gamma2: 1.0, burgers: 1.0, f_choice: FChoice::U }
    }
}

impl SystemParams {
    /// Zero coupling and zero self-interaction.
    pub fn linear() -> Self {
        Self { beta: 0.0, gamma1: 0.0, gamma2: 0.0, burgers: 0.0, ..Self::default() }
    }

    /// Requires `γ₁γ₂ > 0`; the linear limit `γ₁ = γ₂ = 0` is also accepted.
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1 {
            return invalid("alpha must be a positive integer");
        }
        for (name, v) in [("beta", self.beta), ("gamma1", self.gamma1), ("gamma2", self.gamma2), ("burgers", self.burgers)] {
            ensure_finite(name, v)?;
        }
        let linear = self.gamma1 == 0.0 && self.gamma2 == 0.0;
        if !linear && self.gamma1 * self.gamma2 <= 0.0 {
            return invalid(format!(
                "gamma1*gamma2 must be positive (got {} * {})",
                self.gamma1, self.gamma2
            ));
        }
        Ok(())
    }

    /// Weight of the KdV part in the momentum and energy, `γ₁/γ₂` (1 in the linear limit).
    pub fn kdv_weight(&self) -> f64 {
        if self.gamma2 == 0.0 {
            1.0
        } else {
            self.gamma1 / self.gamma2
        }
    }
}

/// Hierarchy cutoffs. `m`, `n` are wavenumber bounds; infinite values disable the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxParams {
    #[serde(with = "extended_f64")]
    pub m: f64,
    #[serde(with = "extended_f64")]
    pub n: f64,
    #[serde(rename = "K", with = "extended_f64")]
    pub k: f64,
    #[serde(rename = "R", with = "extended_f64")]
    pub r: f64,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self { m: f64::INFINITY, n: f64::INFINITY, k: f64::INFINITY, r: f64::INFINITY }
    }
}

impl ApproxParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("n", self.n), ("K", self.k), ("R", self.r)] {
            if v.is_nan() || v <= 0.0 {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if self.n < self.m {
            return invalid(format!("n must be >= m (n = {}, m = {})", self.n, self.m));
        }
        Ok(())
    }

    pub(crate) fn m_bound(&self) -> Option<f64> {
        self.m.is_finite().then_some(self.m)
    }

    pub(crate) fn n_bound(&self) -> Option<f64> {
        self.n.is_finite().then_some(self.n)
    }
}

/// JSON has no infinity, so an inactive cutoff is written as the string `"inf"`.
mod extended_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(D::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ExponentialEulerMaruyama,
    /// Half linear step, RK4 on the drift, half linear step. Deterministic only.
    StrangRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub dt: f64,
    pub scheme: Scheme,
    #[serde(rename = "T0")]
    pub t0: f64,
    pub dealias: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { dt: 1e-3, scheme: Scheme::ExponentialEulerMaruyama, t0: 1.0, dealias: false }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("dt", self.dt)?;
        ensure_finite("T0", self.t0)?;
        if self.dt <= 0.0 {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if self.t0 < self.dt {
            return invalid(format!("T0 = {} is shorter than dt = {}", self.t0, self.dt));
        }
        Ok(())
    }

    /// Number of steps to reach `T0`, rounding to the nearest integer.
    pub fn steps(&self) -> u64 {
        (self.t0 / self.dt).round().max(1.0) as u64
    }
}

/// Level of the model being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hierarchy {
    #[default]
    Full,
    /// Norm-localized system with cutoffs `θ_R` on the running Bourgain norms.
    Localized,
    /// Frequency cutoffs `m`, `n` and amplitude truncation `K`.
    Mnk,
    /// Frequency cutoffs `m`, `n` only.
    Mn,
    /// Noise and data cutoff `m` only; integrated in the shifted variable `v = w - U(t)P_m w₀`.
    M,
}

/// Solution snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: ComplexField,
    pub w: RealField,
    pub t: f64,
    pub step: u64,
}

impl State {
    pub fn new(u: ComplexField, w: RealField) -> Result<Self> {
        u.same_grid(&w)?;
        Ok(Self { u, w, t: 0.0, step: 0 })
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.w.is_finite()
    }
}
