use std::sync::Arc;

use num_complex::Complex64;

use super::drift::DriftSpec;
use super::stopping::StoppingTracker;
use super::{ApproxParams, Hierarchy, Scheme, SchemeConfig, State, SystemParams};
use crate::cutoffs::theta_r;
use crate::error::{invalid, Error, Result};
use crate::noise::{multiply_kdv, multiply_schrodinger, NoiseOperator, NoiseStream, WienerIncrement};
use crate::spectral::{
    airy_propagate, project_low, schrodinger_propagate, sobolev_norm, ComplexField, RealField, SpectralField,
};

/// Paths whose `‖u‖_{H¹}` exceeds this are treated as blown up.
pub const BLOWUP_H1: f64 = 1e8;

/// The two convolution operators driving the equations.
#[derive(Debug, Clone)]
pub struct Noise {
    pub phi: Arc<NoiseOperator>,
    pub psi: Arc<NoiseOperator>,
}

/// Running-norm localization for [`Hierarchy::Localized`].
#[derive(Debug, Clone)]
pub struct Localization {
    pub tracker: StoppingTracker,
}

/// One-step map of a hierarchy level.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: SystemParams,
    approx: ApproxParams,
    hierarchy: Hierarchy,
    scheme: SchemeConfig,
    drift: DriftSpec,
    noise: Option<Noise>,
    /// `w₀` (localized) or `P_m w₀` (level `m`), the data of the free KdV part.
    reference: Option<RealField>,
    localization: Option<Localization>,
}

impl Stepper {
    pub fn new(
        params: SystemParams,
        approx: ApproxParams,
        hierarchy: Hierarchy,
        scheme: SchemeConfig,
        noise: Option<Noise>,
    ) -> Result<Self> {
        params.validate()?;
        approx.validate()?;
        scheme.validate()?;
        if scheme.scheme == Scheme::StrangRk4 && noise.is_some() {
            return invalid("the Strang/RK4 scheme is deterministic; disable noise");
        }
        let drift = match hierarchy {
            Hierarchy::Full | Hierarchy::Localized | Hierarchy::M => DriftSpec::full(&params, scheme.dealias),
            Hierarchy::Mnk => DriftSpec::approx(&params, &approx, scheme.dealias)?,
            Hierarchy::Mn => DriftSpec::approx(&params, &ApproxParams { k: f64::INFINITY, ..approx }, scheme.dealias)?,
        };
        Ok(Self { params, approx, hierarchy, scheme, drift, noise, reference: None, localization: None })
    }

    /// Sets the free-KdV reference data (required by `Localized` and `M`).
    pub fn with_reference(mut self, w0: RealField) -> Self {
        self.reference = Some(w0);
        self
    }

    pub fn with_localization(mut self, tracker: StoppingTracker) -> Self {
        self.localization = Some(Localization { tracker });
        self
    }

    pub fn hierarchy(&self) -> Hierarchy {
        self.hierarchy
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn noise(&self) -> Option<&Noise> {
        self.noise.as_ref()
    }

    pub fn tracker(&self) -> Option<&StoppingTracker> {
        self.localization.as_ref().map(|l| &l.tracker)
    }

    fn reference_at(&self, t: f64) -> Result<Option<RealField>> {
        match &self.reference {
            Some(w0) => Ok(Some(airy_propagate(w0, t)?)),
            None => Ok(None),
        }
    }

    fn m_projection(&self) -> Option<f64> {
        match self.hierarchy {
            Hierarchy::Mnk | Hierarchy::Mn | Hierarchy::M => self.approx.m_bound(),
            Hierarchy::Full | Hierarchy::Localized => None,
        }
    }

    /// Localization factors `(θ_u, θ_v)` and the free KdV part at the current time.
    fn localization_factors(&mut self, state: &State) -> Result<Localizing> {
        if self.hierarchy != Hierarchy::Localized {
            let reference = if self.hierarchy == Hierarchy::M { self.reference_at(state.t)? } else { None };
            return Ok(Localizing { theta_u: 1.0, theta_v: 1.0, reference });
        }
        let reference = self
            .reference_at(state.t)?
            .ok_or_else(|| Error::Precondition("localized stepping needs the initial KdV data".into()))?;
        let loc = self
            .localization
            .as_mut()
            .ok_or_else(|| Error::Precondition("localized stepping needs a stopping tracker".into()))?;
        if loc.tracker.samples() == state.step as usize {
            let v = state.w.sub(&reference)?;
            loc.tracker.record(state.t, &state.u, &v)?;
        }
        let r = self.approx.r;
        let (theta_u, theta_v) = if r.is_infinite() {
            (1.0, 1.0)
        } else {
            (theta_r(loc.tracker.x_norm(), r)?, theta_r(loc.tracker.y_norm(), r)?)
        };
        Ok(Localizing { theta_u, theta_v, reference: Some(reference) })
    }

    /// Advances `state` by one step. `increments` are `(ΔW¹, ΔW²)` and must be given exactly when
    /// noise is configured.
    pub fn step(&mut self, state: &State, increments: Option<(&WienerIncrement, &WienerIncrement)>) -> Result<State> {
        if increments.is_some() != self.noise.is_some() {
            return invalid("noise increments must be supplied exactly when noise is configured");
        }
        let dt = self.scheme.dt;
        let loc = self.localization_factors(state)?;
        let next = match self.scheme.scheme {
            Scheme::ExponentialEulerMaruyama => self.euler_step(state, &loc, increments)?,
            Scheme::StrangRk4 => self.strang_step(state, &loc)?,
        };
        let next = State { t: state.t + dt, step: state.step + 1, ..next };
        check_blowup(state, next)
    }

    fn euler_step(
        &self,
        state: &State,
        loc: &Localizing,
        increments: Option<(&WienerIncrement, &WienerIncrement)>,
    ) -> Result<State> {
        let dt = self.scheme.dt;
        let u_eff = loc.u(&state.u);
        let (nu, nw) = self.drift.evaluate(&u_eff, &loc.w(&state.w)?)?;
        let mut u1 = state.u.zip_with(&nu, |a, b| a + b * dt);
        let shifted = self.hierarchy == Hierarchy::M;
        let mut w1 = match (&loc.reference, shifted) {
            (Some(r), true) => state.w.sub(r)?,
            _ => state.w.clone(),
        };
        w1 = w1.add(&nw.scale(dt))?;
        if let (Some(noise), Some((d1, d2))) = (&self.noise, increments) {
            let m = self.m_projection();
            let mut xi1 = noise.phi.realize(d1)?;
            if let Some(m) = m {
                xi1 = project_low(&xi1, m)?;
            }
            let noise_u = multiply_schrodinger(&u_eff, &xi1, self.params.alpha, self.params.f_choice)?;
            u1 = u1.add(&noise_u)?;
            let xi2 = noise.psi.realize(d2)?;
            let mut noise_w = multiply_kdv(&state.w, &xi2, self.params.alpha)?;
            if let Some(m) = m {
                noise_w = project_low(&noise_w, m)?;
            }
            w1 = w1.add(&noise_w)?;
        }
        let u = schrodinger_propagate(&u1, dt)?;
        let mut w = airy_propagate(&w1, dt)?;
        if let (Some(r), true) = (&loc.reference, shifted) {
            w = w.add(&airy_propagate(r, dt)?)?;
        }
        Ok(State { u, w, ..state.clone() })
    }

    fn strang_step(&self, state: &State, loc: &Localizing) -> Result<State> {
        let dt = self.scheme.dt;
        let half = 0.5 * dt;
        let u = schrodinger_propagate(&state.u, half)?;
        let w = airy_propagate(&state.w, half)?;
        // Localization factors stay frozen over the step; the free KdV part is taken at mid-step.
        let mid = Localizing {
            theta_u: loc.theta_u,
            theta_v: loc.theta_v,
            reference: match &loc.reference {
                Some(r) => Some(airy_propagate(r, half)?),
                None => None,
            },
        };
        let f = |u: &ComplexField, w: &RealField| self.drift.evaluate(&mid.u(u), &mid.w(w)?);
        let (k1u, k1w) = f(&u, &w)?;
        let (k2u, k2w) = f(&axpy_c(&u, &k1u, half), &axpy_r(&w, &k1w, half))?;
        let (k3u, k3w) = f(&axpy_c(&u, &k2u, half), &axpy_r(&w, &k2w, half))?;
        let (k4u, k4w) = f(&axpy_c(&u, &k3u, dt), &axpy_r(&w, &k3w, dt))?;
        let sixth = dt / 6.0;
        let u_vals = (0..u.values().len())
            .map(|i| {
                u.values()[i] + (k1u.values()[i] + 2.0 * k2u.values()[i] + 2.0 * k3u.values()[i] + k4u.values()[i]) * sixth
            })
            .collect();
        let w_vals = (0..w.values().len())
            .map(|i| {
                w.values()[i] + (k1w.values()[i] + 2.0 * k2w.values()[i] + 2.0 * k3w.values()[i] + k4w.values()[i]) * sixth
            })
            .collect();
        let u = ComplexField::from_raw(u.grid(), u_vals);
        let w = RealField::from_raw(w.grid(), w_vals);
        Ok(State { u: schrodinger_propagate(&u, half)?, w: airy_propagate(&w, half)?, ..state.clone() })
    }

    /// Steps from `initial` to `T0`, calling `observe` on the initial state and after every step.
    /// Noise increments come from `streams` (index = step number).
    pub fn run(
        &mut self,
        initial: State,
        streams: Option<(NoiseStream, NoiseStream)>,
        mut observe: impl FnMut(&State, &Stepper) -> Result<()>,
    ) -> Result<State> {
        let steps = self.scheme.steps();
        let mut state = initial;
        observe(&state, self)?;
        for _ in 0..steps {
            let incs = match &streams {
                Some((s1, s2)) => Some((s1.increment(state.step)?, s2.increment(state.step)?)),
                None => None,
            };
            let next = self.step(&state, incs.as_ref().map(|(a, b)| (a, b)))?;
            observe(&next, self)?;
            state = next;
        }
        Ok(state)
    }
}

struct Localizing {
    theta_u: f64,
    theta_v: f64,
    reference: Option<RealField>,
}

impl Localizing {
    fn u(&self, u: &ComplexField) -> ComplexField {
        if self.theta_u == 1.0 {
            u.clone()
        } else {
            u.scale(Complex64::new(self.theta_u, 0.0))
        }
    }

    /// `θ_v(w - U w₀) + U w₀`.
    fn w(&self, w: &RealField) -> Result<RealField> {
        match (&self.reference, self.theta_v == 1.0) {
            (Some(r), false) => w.scale(self.theta_v).add(&r.scale(1.0 - self.theta_v)),
            _ => Ok(w.clone()),
        }
    }
}

fn axpy_c(x: &ComplexField, y: &ComplexField, a: f64) -> ComplexField {
    x.zip_with(y, |p, q| p + q * a)
}

fn axpy_r(x: &RealField, y: &RealField, a: f64) -> RealField {
    RealField::from_raw(x.grid(), x.values().iter().zip(y.values()).map(|(p, q)| p + q * a).collect())
}

fn check_blowup(previous: &State, next: State) -> Result<State> {
    let reason = if !next.is_finite() {
        Some("non-finite field values".to_string())
    } else {
        let h1 = sobolev_norm(&next.u, 1.0, None)?;
        (h1 > BLOWUP_H1).then(|| format!("‖u‖_H1 = {h1:.3e} exceeds {BLOWUP_H1:e}"))
    };
    match reason {
        Some(reason) => Err(Error::BlowUp { t: next.t, reason, last_valid: Box::new(previous.clone()) }),
        None => Ok(next),
    }
}

/// Initial data of a hierarchy level: `P_m` is applied for the `m`, `mn`, `mnK` levels.
pub fn prepare_initial(
    hierarchy: Hierarchy,
    approx: &ApproxParams,
    u0: &ComplexField,
    w0: &RealField,
) -> Result<(ComplexField, RealField)> {
    match (hierarchy, approx.m_bound()) {
        (Hierarchy::Mnk | Hierarchy::Mn | Hierarchy::M, Some(m)) => Ok((project_low(u0, m)?, project_low(w0, m)?)),
        _ => Ok((u0.clone(), w0.clone())),
    }
}
