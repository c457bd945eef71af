//! The deterministic studies: conservation, probes, contraction and the counterexample.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GridConfig};
use super::ensemble::{Level, PathContext};
use super::output::Verdict;
use crate::bourgain::{
    counterexample_norms, loglog_slope, probe_basic_inequality, probe_bilinear_kdv, probe_bilinear_schrodinger,
    probe_duhamel_gain, probe_embedding, probe_localization, probe_power, probe_trilinear, restricted_norm,
    BourgainWeight, CounterexampleNorms, DuhamelReport, LocalizationReport, ProbeReport,
};
use crate::dynamics::{
    contraction_factor, stochastic_convolution, FieldPair, Hierarchy, NoisePath, PicardSetup, Scheme, State,
};
use crate::error::{Error, Result};
use crate::rng::{Channel, SeedLineage};
use crate::spectral::{
    airy_propagate_complex, schrodinger_propagate, sobolev_norm, ComplexField, Grid1D, SpaceTimeField,
};

/// Relative drifts at or below this are rounding noise and carry no order information.
pub const DRIFT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConserveReport {
    pub dts: Vec<f64>,
    /// `max_t |Q(t) - Q(0)| / |Q(0)|` for mass, momentum and energy, per step size.
    pub mass_drift: Vec<f64>,
    pub momentum_drift: Vec<f64>,
    pub energy_drift: Vec<f64>,
    /// `‖(u,w)_{dt_i}(T) - (u,w)_{dt_{i+1}}(T)‖_{𝓗¹}`.
    pub self_differences: Vec<f64>,
    /// Observed order from the last two self-differences (step sizes assumed geometric).
    pub solution_order: f64,
    /// Observed orders of the drifts over the last two step sizes (`None` at rounding level).
    pub drift_orders: [Option<f64>; 3],
}

fn relative_drift(series: &[f64]) -> f64 {
    let q0 = series[0];
    let scale = q0.abs().max(f64::MIN_POSITIVE);
    series.iter().map(|q| (q - q0).abs() / scale).fold(0.0, f64::max)
}

fn order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

/// Noise-off `mnK` runs with the Strang/RK4 scheme at each configured step size.
pub fn run_conserve(cfg: &ExperimentConfig) -> Result<(ConserveReport, Vec<Verdict>)> {
    let c = &cfg.conserve;
    let mut base = cfg.clone();
    base.noise.enabled = false;
    base.scheme.scheme = Scheme::StrangRk4;
    base.track_norms = false;
    let level = Level { hierarchy: Hierarchy::Mnk, approx: cfg.approx };
    let runs = c
        .dts
        .par_iter()
        .map(|&dt| {
            let mut run = base.clone();
            run.scheme.dt = dt;
            run.record_every = 1;
            run.checkpoints = 1;
            let ctx = PathContext::from_config(&run)?;
            let rec = ctx.run_path(&level, 0, false)?;
            if rec.blowup.is_some() {
                return Err(Error::Precondition(format!("deterministic run blew up at dt = {dt}")));
            }
            Ok((rec.rows, rec.last))
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&super::output::DiagnosticsRow) -> f64| -> Vec<f64> {
        runs.iter().map(|(rows, _)| relative_drift(&rows.iter().map(f).collect::<Vec<_>>())).collect()
    };
    let mass_drift = pick(|r| r.mass);
    let momentum_drift = pick(|r| r.momentum);
    let energy_drift = pick(|r| r.energy);
    let self_differences = runs
        .windows(2)
        .map(|w| state_distance(&w[0].1, &w[1].1))
        .collect::<Result<Vec<_>>>()?;
    let n = c.dts.len();
    let ratio = c.dts[n - 2] / c.dts[n - 1];
    let m = self_differences.len();
    let solution_order = order(self_differences[m - 2], self_differences[m - 1], ratio);
    let drift_order = |d: &[f64]| (d[n - 1] > DRIFT_FLOOR).then(|| order(d[n - 2], d[n - 1], ratio));
    let drift_orders = [drift_order(&mass_drift), drift_order(&momentum_drift), drift_order(&energy_drift)];

    let mut verdicts = Vec::new();
    for (name, d, o) in [
        ("mass", &mass_drift, drift_orders[0]),
        ("momentum", &momentum_drift, drift_orders[1]),
        ("energy", &energy_drift, drift_orders[2]),
    ] {
        let finest = d[n - 1];
        verdicts.push(Verdict::new(
            format!("{name}_drift"),
            finest < c.max_drift,
            format!("relative drift {finest:.3e} at dt = {} (limit {:e})", c.dts[n - 1], c.max_drift),
        ));
        verdicts.push(Verdict::new(
            format!("{name}_drift_order"),
            o.map_or(true, |o| o >= c.min_order - c.order_slack),
            match o {
                Some(o) => format!("observed order {o:.3}"),
                None => format!("drift {finest:.3e} is at rounding level"),
            },
        ));
    }
    let diffs: Vec<String> = self_differences.iter().map(|d| format!("{d:.3e}")).collect();
    verdicts.push(Verdict::new(
        "solution_order",
        solution_order >= c.min_order - c.order_slack,
        format!("Richardson order {solution_order:.3} from differences [{}]", diffs.join(", ")),
    ));
    Ok((
        ConserveReport {
            dts: c.dts.clone(),
            mass_drift,
            momentum_drift,
            energy_drift,
            self_differences,
            solution_order,
            drift_orders,
        },
        verdicts,
    ))
}

fn state_distance(a: &State, b: &State) -> Result<f64> {
    let du = a.u.sub(&b.u)?;
    let dw = a.w.sub(&b.w)?;
    Ok((sobolev_norm(&du, 1.0, None)?.powi(2) + sobolev_norm(&dw, 1.0, None)?.powi(2)).sqrt())
}

/// Frozen free Schrödinger path `u(t) = S(t)u₀` and the moments of its stochastic convolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticProbeReport {
    pub b: f64,
    pub order: u32,
    pub paths: usize,
    pub kernel_h1: f64,
    /// `‖F(u)^α‖_{X^T_{0,1}}`.
    pub input_norm: f64,
    /// `E‖Z‖^{2l}_{X^T_{b,1}}` over the first half of the paths and over all of them.
    pub moment_half: f64,
    pub moment: f64,
    pub std_error: f64,
    pub ratio_half: f64,
    pub ratio: f64,
    pub stable: bool,
}

pub fn run_stochastic_convolution_probe(cfg: &ExperimentConfig) -> Result<StochasticProbeReport> {
    let s = &cfg.probe.stochastic;
    if !(0.0..0.5).contains(&s.b) {
        return Err(Error::InvalidArgument(format!("stochastic probe needs b in [0, 1/2), got {}", s.b)));
    }
    let grid = Grid1D::new(s.grid.length, s.grid.points)?;
    let (u0, _) = cfg.initial_data(&grid)?;
    let (phi, _) = cfg.auxiliary_noise_operators(&grid)?;
    let dt = s.span / s.samples as f64;
    let slices = (0..s.samples).map(|k| schrodinger_propagate(&u0, k as f64 * dt)).collect::<Result<Vec<_>>>()?;
    let u = SpaceTimeField::from_slices(dt, &slices)?;
    let params = cfg.system;
    let forced = u.map(|z| {
        let f = params.f_choice.apply(z);
        (0..params.alpha - 1).fold(f, |acc, _| acc * f)
    });
    let input_norm = restricted_norm(&forced, u.span(), &BourgainWeight::x(0.0, 1.0)?)?;
    let kernel_h1 = sobolev_norm(phi.kernel(), 1.0, None)?;
    let weight = BourgainWeight::x(s.b, 1.0)?;
    let l = s.order as i32;
    let samples: Vec<f64> = (0..s.paths as u64)
        .into_par_iter()
        .map(|p| {
            let z = stochastic_convolution(&u, &phi, SeedLineage::new(cfg.seed, p, Channel::Probe), &params)?;
            Ok(restricted_norm(&z, z.span(), &weight)?.powi(2 * l))
        })
        .collect::<Result<_>>()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let moment = mean(&samples);
    let moment_half = mean(&samples[..s.paths / 2]);
    let var = samples.iter().map(|x| (x - moment).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    let norm = (kernel_h1 * input_norm).powi(2 * l);
    let ratio_of = |m: f64| if m == 0.0 { 0.0 } else { m / norm };
    let (ratio, ratio_half) = (ratio_of(moment), ratio_of(moment_half));
    let stable = ratio.is_finite() && (ratio_half - ratio).abs() <= s.tolerance * ratio.abs();
    Ok(StochasticProbeReport {
        b: s.b,
        order: s.order,
        paths: s.paths,
        kernel_h1,
        input_norm,
        moment_half,
        moment,
        std_error: (var / samples.len() as f64).sqrt(),
        ratio_half,
        ratio,
        stable,
    })
}

/// Everything the probe scenario computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSuite {
    pub reports: Vec<ProbeReport>,
    /// Basic-inequality ratio at `a = b = 3/8`, `α = β`.
    pub basic_inequality_spot: f64,
    pub duhamel: DuhamelReport,
    pub localization: LocalizationReport,
    pub stochastic: Option<StochasticProbeReport>,
}

pub const BASIC_SPOT_VALUE: f64 = 4.0;
pub const BASIC_SPOT_TOLERANCE: f64 = 1e-6;
pub const DUHAMEL_SLOPE_TOLERANCE: f64 = 0.25;

pub fn run_probes(cfg: &ExperimentConfig) -> Result<(ProbeSuite, Vec<Verdict>)> {
    let p = &cfg.probe;
    let seed = cfg.seed;
    let mut reports = vec![
        probe_bilinear_schrodinger(p.a, p.b, p.trials, seed)?,
        probe_trilinear(p.a, p.b, p.trials, seed.wrapping_add(1))?,
        probe_bilinear_kdv(p.a, p.b, false, p.trials, seed.wrapping_add(2))?,
        probe_bilinear_kdv(p.a, p.b, true, p.trials, seed.wrapping_add(3))?,
    ];
    for (i, &alpha) in p.powers.iter().enumerate() {
        reports.push(probe_power(alpha, p.b, p.trials, seed.wrapping_add(10 + i as u64))?);
    }
    reports.push(probe_embedding(p.embedding_b, p.trials, seed.wrapping_add(4))?);
    let spot = probe_basic_inequality(0.375, 0.375, 0.0, 0.0)?;
    let duhamel = probe_duhamel_gain(p.a, p.b, &p.duhamel_times, p.duhamel_trials, seed.wrapping_add(5))?;
    let localization = probe_localization(p.b, p.localization_r, p.trials, seed.wrapping_add(6))?;
    let stochastic = if p.stochastic.enabled { Some(run_stochastic_convolution_probe(cfg)?) } else { None };

    let mut verdicts: Vec<Verdict> = reports
        .iter()
        .map(|r| {
            Verdict::new(
                format!("{}_stable", r.lemma),
                r.stable,
                format!("max ratio {:.4e} coarse, {:.4e} refined", r.max_ratio_coarse, r.max_ratio_refined),
            )
        })
        .collect();
    verdicts.push(Verdict::new(
        "basic_inequality_spot",
        (spot - BASIC_SPOT_VALUE).abs() <= BASIC_SPOT_TOLERANCE,
        format!("ratio {spot:.12} (expected {BASIC_SPOT_VALUE})"),
    ));
    verdicts.push(Verdict::new(
        "duhamel_slope",
        (duhamel.slope - duhamel.expected_slope).abs() <= DUHAMEL_SLOPE_TOLERANCE,
        format!("slope {:.4} (expected {:.4} ± {DUHAMEL_SLOPE_TOLERANCE})", duhamel.slope, duhamel.expected_slope),
    ));
    verdicts.push(Verdict::new(
        "localization_stable",
        localization.stable,
        format!("bound {:.4} coarse, {:.4} refined", localization.bound_coarse, localization.bound_refined),
    ));
    if let Some(s) = &stochastic {
        verdicts.push(Verdict::new(
            "stochastic_convolution_stable",
            s.stable,
            format!("ratio {:.4e} over {} paths, {:.4e} over half", s.ratio, s.paths, s.ratio_half),
        ));
    }
    Ok((ProbeSuite { reports, basic_inequality_spot: spot, duhamel, localization, stochastic }, verdicts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub r: f64,
    pub b: f64,
    pub times: Vec<f64>,
    /// `factors[i][j]`: horizon `times[i]`, pair `j`.
    pub factors: Vec<Vec<f64>>,
    pub max_factors: Vec<f64>,
    pub mean_factors: Vec<f64>,
}

/// Spatial band of the random pairs.
const PAIR_BAND: usize = 12;

/// A perturbed free solution: `u = S(t)f·(1 + ε cos(ωt + φ))`, `v = U(t)g` with `g` real.
fn random_pair(grid: &Grid1D, span: f64, samples: usize, rng: &mut ChaCha8Rng) -> Result<FieldPair> {
    let dt = span / samples as f64;
    let scale_u: f64 = rng.gen_range(0.1..1.0);
    let scale_v: f64 = rng.gen_range(0.1..1.0);
    let f = unit_profile(grid, rng)?.scale(scale_u.into());
    let g = unit_profile(grid, rng)?.real_part().to_complex().scale(scale_v.into());
    let (eps, omega, phase) = (rng.gen_range(0.0..0.3), rng.gen_range(-5.0..5.0), rng.gen_range(0.0..6.3));
    let mut us = Vec::with_capacity(samples);
    let mut vs = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = k as f64 * dt;
        let m = 1.0 + eps * (omega * t + phase).cos();
        us.push(schrodinger_propagate(&f, t)?.scale(m.into()));
        vs.push(airy_propagate_complex(&g, t)?.real_part().to_complex());
    }
    Ok(FieldPair { u: SpaceTimeField::from_slices(dt, &us)?, v: SpaceTimeField::from_slices(dt, &vs)? })
}

/// Random band-limited profile with unit `H¹` norm.
fn unit_profile(grid: &Grid1D, rng: &mut ChaCha8Rng) -> Result<ComplexField> {
    let f = crate::bourgain::random_profile(grid, rng, PAIR_BAND);
    let norm = sobolev_norm(&f, 1.0, None)?;
    Ok(f.scale((1.0 / norm).into()))
}

fn grid_of(g: &GridConfig) -> Result<Grid1D> {
    Grid1D::new(g.length, g.points)
}

/// Contraction factors of the localized Picard map on random pairs at each horizon.
pub fn run_contraction(cfg: &ExperimentConfig) -> Result<(ContractionReport, Vec<Verdict>)> {
    let c = &cfg.contraction;
    let grid = grid_of(&c.grid)?;
    let (u0, w0) = cfg.initial_data(&grid)?;
    let noise = if c.noise {
        let (phi, psi) = cfg.auxiliary_noise_operators(&grid)?;
        Some((Arc::new(phi), Arc::new(psi)))
    } else {
        None
    };
    let factors = c
        .times
        .iter()
        .map(|&t| {
            (0..c.pairs as u64)
                .into_par_iter()
                .map(|j| {
                    let mut rng = crate::rng::stream(cfg.seed, j, Channel::Probe as u64, 0);
                    let p1 = random_pair(&grid, t, c.samples, &mut rng)?;
                    let p2 = random_pair(&grid, t, c.samples, &mut rng)?;
                    let setup = PicardSetup {
                        u0: u0.clone(),
                        w0: w0.clone(),
                        r: c.r,
                        b: c.b,
                        params: cfg.system,
                        noise: noise.as_ref().map(|(phi, psi)| NoisePath {
                            phi: phi.clone(),
                            psi: psi.clone(),
                            master_seed: cfg.seed,
                            path_id: j,
                        }),
                    };
                    contraction_factor(&p1, &p2, &setup)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let max_factors: Vec<f64> = factors.iter().map(|f| f.iter().copied().fold(0.0, f64::max)).collect();
    let mean_factors: Vec<f64> = factors.iter().map(|f| f.iter().sum::<f64>() / f.len() as f64).collect();
    let last = *max_factors.last().expect("validated non-empty horizon list");
    let verdicts = vec![
        Verdict::new(
            "contraction_at_shortest_horizon",
            last < 1.0,
            format!("max factor {last:.4} over {} pairs at T = {}", c.pairs, c.times.last().unwrap()),
        ),
        Verdict::new(
            "factor_decreases_with_horizon",
            max_factors.windows(2).all(|w| w[1] < w[0]),
            format!("max factors {max_factors:.4?} at T = {:?}", c.times),
        ),
    ];
    Ok((ContractionReport { r: c.r, b: c.b, times: c.times.clone(), factors, max_factors, mean_factors }, verdicts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub r: f64,
    pub q: f64,
    pub norms: Vec<CounterexampleNorms>,
    pub slope: f64,
    pub expected_slope: f64,
}

pub const SUP_NORM_TOLERANCE: f64 = 1e-10;

pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<(CounterexampleReport, Vec<Verdict>)> {
    let c = &cfg.counterexample;
    let norms = c.n_values.iter().map(|&n| counterexample_norms(n, c.r, c.q)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = norms.iter().map(|n| n.n as f64).collect();
    let ys: Vec<f64> = norms.iter().map(|n| n.mixed).collect();
    let slope = loglog_slope(&xs, &ys)?;
    let spread = norms.iter().map(|n| (n.sup_h1 - norms[0].sup_h1).abs()).fold(0.0, f64::max);
    let verdicts = vec![
        Verdict::new("sup_norm_constant", spread <= SUP_NORM_TOLERANCE, format!("spread {spread:.3e}")),
        Verdict::new(
            "mixed_norm_slope",
            (slope - c.expected_slope).abs() <= c.slope_tolerance,
            format!("slope {slope:.4} (expected {} ± {})", c.expected_slope, c.slope_tolerance),
        ),
    ];
    Ok((CounterexampleReport { r: c.r, q: c.q, norms, slope, expected_slope: c.expected_slope }, verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_and_order_helpers() {
        assert_eq!(relative_drift(&[2.0, 2.0, 2.002, 1.999]), (2.002 - 2.0) / 2.0);
        assert!((order(4e-6, 1e-6, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stochastic_probe_trivial_cases() {
        let mut cfg = ExperimentConfig::default();
        cfg.probe.stochastic.paths = 4;
        cfg.probe.stochastic.samples = 16;
        cfg.noise.phi = crate::noise::KernelSpec::Zero;
        let r = run_stochastic_convolution_probe(&cfg).unwrap();
        assert_eq!((r.moment, r.ratio), (0.0, 0.0));

        let mut cfg = ExperimentConfig::default();
        cfg.probe.stochastic.paths = 4;
        cfg.probe.stochastic.samples = 16;
        cfg.initial.u.amplitude = 0.0;
        let r = run_stochastic_convolution_probe(&cfg).unwrap();
        assert_eq!(r.moment, 0.0);

        cfg.probe.stochastic.b = 0.5;
        assert!(run_stochastic_convolution_probe(&cfg).is_err());
    }

    #[test]
    fn counterexample_scenario() {
        let (report, verdicts) = run_counterexample(&ExperimentConfig::default()).unwrap();
        assert!(verdicts.iter().all(|v| v.passed), "{verdicts:?}");
        assert_eq!(report.norms.len(), 4);
    }
}
