use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{DiagnosticsRow, Verdict};
use crate::cutoffs::TruncationFamily;
use crate::dynamics::{
    prepare_initial, ApproxParams, Hierarchy, Noise, SchemeConfig, State, Stepper, StoppingTracker, SystemParams,
};
use crate::error::{Error, Result};
use crate::functionals::{constant_intensity, mass, mass_drift_oracle, ConservedTriple, MomentSeries};
use crate::noise::NoiseStream;
use crate::rng::{Channel, SeedLineage};
use crate::spectral::{airy_propagate, sobolev_norm, ComplexField, Grid1D, RealField, HOMOGENEOUS_EXPONENT};

/// Everything a single path needs apart from its id and hierarchy level.
#[derive(Debug, Clone)]
pub struct PathContext {
    pub grid: Grid1D,
    pub u0: ComplexField,
    pub w0: RealField,
    pub params: SystemParams,
    pub scheme: SchemeConfig,
    pub noise: Option<Noise>,
    pub basis_size: usize,
    pub seed: u64,
    pub record_every: u64,
    /// Steps that are always recorded.
    pub checkpoint_steps: Vec<u64>,
    pub track_norms: bool,
}

/// A hierarchy level with its cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub hierarchy: Hierarchy,
    pub approx: ApproxParams,
}

#[derive(Debug, Clone)]
pub struct PathRecord {
    pub path_id: u64,
    pub rows: Vec<DiagnosticsRow>,
    /// States at the recorded rows, when requested.
    pub states: Vec<State>,
    pub blowup: Option<f64>,
    /// Final state, or the last finite one after a blow-up.
    pub last: State,
    /// `max_t max_x max(|u|², |w|)`, the amplitude the truncation `φ_K` sees.
    pub max_amplitude: f64,
}

impl PathContext {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let (u0, w0) = cfg.initial_data(&grid)?;
        let noise = if cfg.noise.enabled {
            let (phi, psi) = cfg.noise_operators(&grid)?;
            Some(Noise { phi: Arc::new(phi), psi: Arc::new(psi) })
        } else {
            None
        };
        Ok(Self {
            grid,
            u0,
            w0,
            params: cfg.system,
            scheme: cfg.scheme,
            noise,
            basis_size: cfg.noise.basis_size,
            seed: cfg.seed,
            record_every: cfg.record_every,
            checkpoint_steps: checkpoint_steps(cfg.scheme.steps(), cfg.checkpoints),
            track_norms: cfg.track_norms,
        })
    }

    pub fn steps(&self) -> u64 {
        self.scheme.steps()
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        self.checkpoint_steps.iter().map(|&s| s as f64 * self.scheme.dt).collect()
    }

    fn recorded(&self, step: u64) -> bool {
        step % self.record_every == 0 || step == self.steps() || self.checkpoint_steps.contains(&step)
    }

    fn streams(&self, path_id: u64) -> Option<(NoiseStream, NoiseStream)> {
        self.noise.as_ref().map(|_| {
            let l1 = SeedLineage::new(self.seed, path_id, Channel::Schrodinger);
            let make = |lineage| NoiseStream { lineage, dt: self.scheme.dt, basis_size: self.basis_size, active: true };
            (make(l1), make(l1.with_channel(Channel::Kdv)))
        })
    }

    /// Integrates one path. Blow-up is not an error here: the rows up to the last finite state
    /// are kept and the final one carries the marker.
    pub fn run_path(&self, level: &Level, path_id: u64, keep_states: bool) -> Result<PathRecord> {
        let (u0, w0) = prepare_initial(level.hierarchy, &level.approx, &self.u0, &self.w0)?;
        let mut stepper = Stepper::new(self.params, level.approx, level.hierarchy, self.scheme, self.noise.clone())?;
        let capacity = self.steps() as usize + 1;
        match level.hierarchy {
            Hierarchy::Localized => {
                let tracker = StoppingTracker::with_default_b(&self.grid, self.scheme.dt, capacity, level.approx.r)?;
                stepper = stepper.with_reference(w0.clone()).with_localization(tracker);
            }
            Hierarchy::M => stepper = stepper.with_reference(w0.clone()),
            _ => {}
        }
        let mut own_tracker = if self.track_norms && level.hierarchy != Hierarchy::Localized {
            Some(StoppingTracker::with_default_b(&self.grid, self.scheme.dt, capacity, level.approx.r)?)
        } else {
            None
        };
        let family = match level.hierarchy {
            Hierarchy::Mnk if level.approx.k.is_finite() => TruncationFamily::new(level.approx.k)?,
            _ => TruncationFamily::inactive(),
        };

        let mut rows = Vec::new();
        let mut states = Vec::new();
        let mut max_amplitude: f64 = 0.0;
        let mut last_recorded = None;
        let initial = State::new(u0, w0.clone())?;
        let outcome = stepper.run(initial, self.streams(path_id), |state, st| {
            if let Some(tr) = own_tracker.as_mut() {
                let v = state.w.sub(&airy_propagate(&w0, state.t)?)?;
                tr.record(state.t, &state.u, &v)?;
            }
            max_amplitude = max_amplitude.max(state.u.max_abs().powi(2)).max(state.w.max_abs());
            if self.recorded(state.step) {
                let tracker = st.tracker().or(own_tracker.as_ref());
                rows.push(diagnostics_row(path_id, state, tracker, &family, &self.params)?);
                if keep_states {
                    states.push(state.clone());
                }
                last_recorded = Some(state.step);
            }
            Ok(())
        });
        let (last, blowup) = match outcome {
            Ok(last) => (last, None),
            Err(Error::BlowUp { t, last_valid, .. }) => {
                if last_recorded != Some(last_valid.step) {
                    let tracker = stepper.tracker().or(own_tracker.as_ref());
                    rows.push(diagnostics_row(path_id, &last_valid, tracker, &family, &self.params)?);
                    if keep_states {
                        states.push((*last_valid).clone());
                    }
                }
                if let Some(row) = rows.last_mut() {
                    row.blowup = true;
                }
                (*last_valid, Some(t))
            }
            Err(e) => return Err(e),
        };
        Ok(PathRecord { path_id, rows, states, blowup, last, max_amplitude })
    }

    /// Runs paths `0..paths` in parallel; the result is in path order whatever the scheduling.
    pub fn run_paths(&self, level: &Level, paths: usize, keep_states: bool) -> Result<Vec<PathRecord>> {
        (0..paths as u64).into_par_iter().map(|p| self.run_path(level, p, keep_states)).collect()
    }
}

/// Steps `round(steps·c/C)`, `c = 1..=C`.
pub fn checkpoint_steps(steps: u64, count: usize) -> Vec<u64> {
    (1..=count as u64).map(|c| ((steps * c) as f64 / count as f64).round() as u64).collect()
}

pub fn diagnostics_row(
    path_id: u64,
    state: &State,
    tracker: Option<&StoppingTracker>,
    family: &TruncationFamily,
    params: &SystemParams,
) -> Result<DiagnosticsRow> {
    let c = ConservedTriple::evaluate(&state.u, &state.w, family, params)?;
    Ok(DiagnosticsRow {
        path_id,
        t: state.t,
        mass: c.mass,
        momentum: c.momentum,
        energy: c.energy,
        u_h1: sobolev_norm(&state.u, 1.0, None)?,
        w_h1: sobolev_norm(&state.w, 1.0, None)?,
        w_hdot_m38: sobolev_norm(&state.w, 0.0, Some(HOMOGENEOUS_EXPONENT))?,
        x_norm: tracker.map(|t| t.x_norm()),
        y_norm: tracker.map(|t| t.y_norm()),
        sigma1_hit: tracker.is_some_and(|t| t.sigma1().is_some()),
        sigma2_hit: tracker.is_some_and(|t| t.sigma2().is_some()),
        blowup: false,
    })
}

/// Moment curves and verdicts of an ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub paths: usize,
    pub blown_up: usize,
    /// `E sup_{s≤t} ‖(u,w)‖^{2l}_{𝓗¹}` over the paths without blow-up.
    pub moments: MomentSeries,
    /// `E‖u(t)‖²` at the checkpoints.
    pub mass: MomentSeries,
    /// `‖u₀‖²e^{D₀t}` when the oracle applies.
    pub mass_oracle: Option<Vec<f64>>,
    pub intensity: Option<f64>,
}

/// Context of the ensemble evaluation that does not come from the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleInputs {
    pub checkpoint_times: Vec<f64>,
    pub order: u32,
    pub intensity: Option<f64>,
    /// `‖u₀‖²e^{D₀t}` at the checkpoints.
    pub mass_oracle: Option<Vec<f64>>,
    pub max_blowup_fraction: f64,
}

/// Evaluates moments, the mass comparison and the verdicts from diagnostics rows alone, so the
/// written CSV reproduces them. Rows must be grouped by path in path order.
pub fn evaluate_ensemble(rows: &[DiagnosticsRow], inputs: &EnsembleInputs) -> Result<(EnsembleReport, Vec<Verdict>)> {
    let times = &inputs.checkpoint_times;
    let mut groups: Vec<&[DiagnosticsRow]> = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].path_id != rows[start].path_id {
            if i > start {
                groups.push(&rows[start..i]);
            }
            start = i;
        }
    }
    let paths = groups.len();
    let blown: Vec<bool> = groups.iter().map(|g| g.iter().any(|r| r.blowup)).collect();
    let blown_up = blown.iter().filter(|&&b| b).count();

    let mut moment_samples = Vec::new();
    let mut mass_samples = Vec::new();
    for (g, _) in groups.iter().zip(&blown).filter(|(_, &b)| !b) {
        let mut running = 0.0f64;
        let mut next = 0;
        let mut moments = Vec::with_capacity(times.len());
        let mut masses = Vec::with_capacity(times.len());
        for r in g.iter() {
            running = running.max(r.h1_pair_sq().powi(inputs.order as i32));
            while next < times.len() && r.t >= times[next] - 1e-9 * times[next].max(1.0) {
                moments.push(running);
                masses.push(r.mass);
                next += 1;
            }
        }
        if moments.len() != times.len() {
            return Err(Error::Internal(format!("path {} misses checkpoint rows", g[0].path_id)));
        }
        moment_samples.push(moments);
        mass_samples.push(masses);
    }
    let moments = MomentSeries::from_samples(times.clone(), &moment_samples, inputs.order)?;
    let mass = MomentSeries::from_samples(times.clone(), &mass_samples, 1)?;

    let mut verdicts = Vec::new();
    let fraction = if paths == 0 { 0.0 } else { blown_up as f64 / paths as f64 };
    verdicts.push(Verdict::new(
        "blowup_fraction",
        fraction <= inputs.max_blowup_fraction,
        format!("{blown_up} of {paths} paths blew up (limit {:.0}%)", 100.0 * inputs.max_blowup_fraction),
    ));
    let finite = moments.estimates.iter().chain(&moments.std_errors).all(|v| v.is_finite());
    verdicts.push(Verdict::new("moments_finite", finite, format!("order {}", inputs.order)));

    if let (Some(expected), true) = (&inputs.mass_oracle, mass.paths > 1) {
        let worst = expected
            .iter()
            .zip(mass.estimates.iter().zip(&mass.std_errors))
            .map(|(e, (m, se))| if *se > 0.0 { (m - e).abs() / se } else if m == e { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max);
        verdicts.push(Verdict::new(
            "mass_drift",
            worst <= 3.0,
            format!("largest deviation {worst:.3} standard errors over {} checkpoints", times.len()),
        ));
    }
    Ok((
        EnsembleReport { paths, blown_up, moments, mass, mass_oracle: inputs.mass_oracle.clone(), intensity: inputs.intensity },
        verdicts,
    ))
}

/// The inputs of [`evaluate_ensemble`] for a configuration. The mass oracle needs `α = 1`,
/// `F(u) = u` and a spatially constant intensity; without noise the mass is conserved.
pub fn ensemble_inputs(cfg: &ExperimentConfig, ctx: &PathContext) -> Result<EnsembleInputs> {
    let times = ctx.checkpoint_times();
    let (u0, _) = prepare_initial(cfg.hierarchy, &cfg.approx, &ctx.u0, &ctx.w0)?;
    let m0 = mass(&u0);
    let (intensity, mass_oracle) = match &ctx.noise {
        None => (Some(0.0), Some(vec![m0; times.len()])),
        Some(noise) => {
            let d = noise.phi.diffusion_intensity();
            match mass_drift_oracle(m0, &d, &cfg.system, &times) {
                Ok(oracle) => (Some(constant_intensity(&d)?), Some(oracle)),
                Err(_) => (constant_intensity(&d).ok(), None),
            }
        }
    };
    Ok(EnsembleInputs {
        checkpoint_times: times,
        order: cfg.moment_order,
        intensity,
        mass_oracle,
        max_blowup_fraction: cfg.max_blowup_fraction,
    })
}

/// Runs the configured ensemble and evaluates it.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<(Vec<DiagnosticsRow>, EnsembleReport, Vec<Verdict>)> {
    let ctx = PathContext::from_config(cfg)?;
    let level = Level { hierarchy: cfg.hierarchy, approx: cfg.approx };
    let records = ctx.run_paths(&level, cfg.paths, false)?;
    let rows: Vec<DiagnosticsRow> = records.into_iter().flat_map(|r| r.rows).collect();
    let (report, verdicts) = evaluate_ensemble(&rows, &ensemble_inputs(cfg, &ctx)?)?;
    Ok((rows, report, verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.length = 32.0 * std::f64::consts::PI;
        cfg.grid.points = 256;
        cfg.scheme.dt = 1e-3;
        cfg.scheme.t0 = 0.05;
        cfg.paths = 3;
        cfg.record_every = 10;
        cfg
    }

    #[test]
    fn checkpoints_are_spread_over_the_run() {
        assert_eq!(checkpoint_steps(1000, 5), vec![200, 400, 600, 800, 1000]);
        assert_eq!(checkpoint_steps(7, 2), vec![4, 7]);
    }

    #[test]
    fn free_linear_run_has_constant_moments() {
        let mut cfg = small_config();
        cfg.system = SystemParams::linear();
        cfg.noise.enabled = false;
        cfg.paths = 1;
        let (rows, report, verdicts) = run_ensemble(&cfg).unwrap();
        assert!(verdicts.iter().all(|v| v.passed), "{verdicts:?}");
        let first = rows[0].h1_pair_sq();
        for e in &report.moments.estimates {
            assert!((e - first).abs() < 1e-10 * first);
        }
        assert_eq!(report.mass_oracle.as_ref().unwrap().len(), 5);
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let cfg = small_config();
        let (rows, report, _) = run_ensemble(&cfg).unwrap();
        assert_eq!(report.paths, 3);
        assert_eq!(rows.len(), 3 * 6);
        for g in rows.chunks(6) {
            assert!(g.iter().all(|r| r.path_id == g[0].path_id));
            assert!(g.windows(2).all(|w| w[0].t < w[1].t));
            assert!(g.iter().all(|r| r.x_norm.is_none() && !r.blowup));
        }
        assert!(rows.windows(2).all(|w| w[0].path_id <= w[1].path_id));
    }

    #[test]
    fn blowup_keeps_rows_and_marks_the_last() {
        let mut cfg = small_config();
        cfg.initial.u.amplitude = 30.0;
        cfg.initial.u.width = 0.3;
        cfg.system.beta = 400.0;
        cfg.noise.enabled = false;
        cfg.paths = 1;
        cfg.scheme.dt = 2e-2;
        cfg.scheme.t0 = 2.0;
        cfg.record_every = 1;
        let ctx = PathContext::from_config(&cfg).unwrap();
        let level = Level { hierarchy: Hierarchy::Full, approx: cfg.approx };
        let rec = ctx.run_path(&level, 0, false).unwrap();
        let t = rec.blowup.expect("expected a blow-up");
        assert!(rec.rows.last().unwrap().blowup);
        assert!(rec.rows.iter().rev().skip(1).all(|r| !r.blowup));
        assert!(rec.rows.last().unwrap().t < t);
        assert_eq!(rec.rows.len() as f64, (t / cfg.scheme.dt).round());
        let (_, verdicts) = evaluate_ensemble(&rec.rows, &ensemble_inputs(&cfg, &ctx).unwrap()).unwrap();
        assert!(!verdicts[0].passed);
    }

    #[test]
    fn tracked_norms_fill_the_columns() {
        let mut cfg = small_config();
        cfg.track_norms = true;
        cfg.approx.r = 1e-3;
        cfg.paths = 1;
        let (rows, _, _) = run_ensemble(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.x_norm.is_some() && r.y_norm.is_some()));
        assert!(rows.windows(2).all(|w| w[1].x_norm >= w[0].x_norm));
        assert!(rows.last().unwrap().sigma1_hit);
    }
}
