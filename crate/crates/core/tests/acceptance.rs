//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest harness so the
//! lines always reach the output; the process fails if any criterion fails. Criteria that share
//! a run (3 and 4, 5 and 6) are each charged the whole run against their time budget.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skdv_core::harness::{
    ensemble_inputs, evaluate_ensemble, is_nonincreasing, run, run_conserve, run_contraction, run_counterexample,
    run_ensemble, run_hierarchy_convergence, run_probes, DiagnosticsRow, ExperimentConfig, PathContext, Scenario,
};
use skdv_core::spectral::{airy_propagate, schrodinger_propagate, sobolev_norm, ComplexField, Grid1D, RealField};
use skdv_core::Result;

const PROPAGATOR_TOL: f64 = 1e-12;
const UNITARITY_TOL: f64 = 1e-11;
const UNITARITY_FIELDS: usize = 1000;

const DRIFT_TOL: f64 = 1e-6;
const MIN_ORDER: f64 = 2.0;
/// Observed orders of a second-order scheme scatter around 2 at finite step sizes.
const ORDER_SLACK: f64 = 0.05;

const MASS_PATHS: usize = 400;
const MASS_SE: f64 = 3.0;
const MOMENT_PATHS: usize = 200;
const MOMENT_ORDERS: [u32; 2] = [1, 2];
const M_STABILITY: f64 = 0.25;

const PROBE_B: f64 = 0.45;
const SPOT_VALUE: f64 = 4.0;
const SPOT_TOL: f64 = 1e-6;
const REFINED_OVER_COARSE: f64 = 2.0;

const DUHAMEL_SLOPE: f64 = 0.1;
const DUHAMEL_TOL: f64 = 0.25;
const DUHAMEL_TRIALS: usize = 20;

const CONTRACTION_R: f64 = 2.0;
const CONTRACTION_TIMES: [f64; 3] = [0.2, 0.1, 0.05];
const CONTRACTION_PAIRS: usize = 20;

const SUP_TOL: f64 = 1e-10;
const COUNTER_SLOPE: f64 = 0.375;
const COUNTER_TOL: f64 = 0.05;

const IDENTITY_TOL: f64 = 1e-12;
const HIERARCHY_PATHS: usize = 8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { passed, detail: detail.into() })
}

fn report(id: usize, name: &str, budget: Duration, start: Instant, result: Result<Outcome>) -> bool {
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(o) => (o.passed && elapsed <= budget, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} criterion {id:2} {name}: {detail} [{:.1} s of {} s]",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    passed
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn propagators() -> Result<Outcome> {
    let grid = Grid1D::default_box();
    let mut worst: f64 = 0.0;
    for j in [-40i64, -3, 0, 1, 7, 64, 200] {
        let xi = 2.0 * PI * j as f64 / grid.length();
        for t in [0.0, 0.013, 0.5, 1.0, 2.7] {
            let wave = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, xi * x));
            let expected = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, xi * x - xi * xi * t));
            worst = worst.max(schrodinger_propagate(&wave, t)?.sub(&expected)?.max_abs());
            let cos = RealField::new(&grid, grid.xs().iter().map(|x| (xi * x).cos()).collect())?;
            let moved = RealField::new(&grid, grid.xs().iter().map(|x| (xi * x + xi.powi(3) * t).cos()).collect())?;
            worst = worst.max(airy_propagate(&cos, t)?.sub(&moved)?.max_abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut unitarity: f64 = 0.0;
    for _ in 0..UNITARITY_FIELDS {
        let values = (0..grid.points()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let f = ComplexField::new(&grid, values)?;
        let t = rng.gen_range(-5.0..5.0);
        let n = sobolev_norm(&f, 0.0, None)?;
        unitarity = unitarity.max((sobolev_norm(&schrodinger_propagate(&f, t)?, 0.0, None)? - n).abs() / n);
        let g = RealField::new(&grid, f.values().iter().map(|z| z.re).collect())?;
        let m = sobolev_norm(&g, 0.0, None)?;
        unitarity = unitarity.max((sobolev_norm(&airy_propagate(&g, t)?, 0.0, None)? - m).abs() / m);
    }
    outcome(
        worst < PROPAGATOR_TOL && unitarity < UNITARITY_TOL,
        format!("single-mode error {worst:.2e}, unitarity defect {unitarity:.2e} over {UNITARITY_FIELDS} fields"),
    )
}

fn conservation() -> Result<Outcome> {
    let cfg = ExperimentConfig { scenario: Scenario::Conserve, ..Default::default() };
    let (r, _) = run_conserve(&cfg)?;
    let last = r.dts.len() - 1;
    let drifts = [r.mass_drift[last], r.momentum_drift[last], r.energy_drift[last]];
    let drift_ok = (r.dts[last] - 2.5e-4).abs() < 1e-15 && drifts.iter().all(|&d| d < DRIFT_TOL);
    let order_ok = r.solution_order >= MIN_ORDER - ORDER_SLACK;
    outcome(
        drift_ok && order_ok,
        format!(
            "drifts at dt = {:e}: mass {:.2e}, momentum {:.2e}, energy {:.2e}; Richardson order {:.4}",
            r.dts[last], drifts[0], drifts[1], drifts[2], r.solution_order
        ),
    )
}

fn ensemble_rows() -> Result<(ExperimentConfig, Vec<DiagnosticsRow>)> {
    let mut cfg = ExperimentConfig { scenario: Scenario::Ensemble, paths: MASS_PATHS, ..Default::default() };
    cfg.record_every = 10;
    let (rows, _, _) = run_ensemble(&cfg)?;
    Ok((cfg, rows))
}

fn mass_drift(cfg: &ExperimentConfig, rows: &[DiagnosticsRow]) -> Result<Outcome> {
    let ctx = PathContext::from_config(cfg)?;
    let inputs = ensemble_inputs(cfg, &ctx)?;
    let (report, _) = evaluate_ensemble(rows, &inputs)?;
    let Some(oracle) = &report.mass_oracle else {
        return outcome(false, "mass oracle does not apply to the configuration");
    };
    let dev: Vec<f64> = oracle
        .iter()
        .zip(report.mass.estimates.iter().zip(&report.mass.std_errors))
        .map(|(e, (m, se))| (m - e).abs() / se)
        .collect();
    let worst = dev.iter().cloned().fold(0.0, f64::max);
    outcome(
        report.paths == MASS_PATHS && dev.len() == 5 && worst <= MASS_SE,
        format!(
            "{} paths, D0 = {:.4}, deviations {:?} standard errors at t = {:?}",
            report.paths,
            report.intensity.unwrap_or(f64::NAN),
            dev.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>(),
            report.mass.times
        ),
    )
}

fn moments(cfg: &ExperimentConfig, rows: &[DiagnosticsRow]) -> Result<Outcome> {
    let ctx = PathContext::from_config(cfg)?;
    let half: Vec<DiagnosticsRow> = rows.iter().filter(|r| (r.path_id as usize) < MOMENT_PATHS).copied().collect();
    let blowups = rows.iter().filter(|r| r.blowup).count();
    let mut passed = blowups == 0;
    let mut parts = vec![format!("{blowups} blow-up markers")];
    for l in MOMENT_ORDERS {
        let inputs = skdv_core::harness::EnsembleInputs { order: l, ..ensemble_inputs(cfg, &ctx)? };
        let (small, _) = evaluate_ensemble(&half, &inputs)?;
        let (large, _) = evaluate_ensemble(rows, &inputs)?;
        let finite = small.moments.estimates.iter().chain(&large.moments.estimates).all(|v| v.is_finite());
        let gap = small
            .moments
            .estimates
            .iter()
            .zip(&large.moments.estimates)
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max);
        passed &= finite && small.paths == MOMENT_PATHS && gap <= M_STABILITY;
        parts.push(format!("l = {l}: M = {MOMENT_PATHS} vs {} differ by {:.2}%", large.paths, 100.0 * gap));
    }
    outcome(passed, parts.join("; "))
}

fn probe_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig { scenario: Scenario::Probe, ..Default::default() };
    cfg.probe.a = PROBE_B;
    cfg.probe.b = PROBE_B;
    cfg.probe.duhamel_trials = DUHAMEL_TRIALS;
    cfg
}

fn probes(suite: &skdv_core::harness::ProbeSuite) -> Result<Outcome> {
    let mut unstable: Vec<String> = suite
        .reports
        .iter()
        .filter(|r| !(r.max_ratio_refined <= REFINED_OVER_COARSE * r.max_ratio_coarse && r.max_ratio_coarse.is_finite()))
        .map(|r| r.lemma.clone())
        .collect();
    let loc = &suite.localization;
    if !loc.stable {
        unstable.push("localization".into());
    }
    if !suite.stochastic.as_ref().is_some_and(|s| s.stable) {
        unstable.push("stochastic_convolution".into());
    }
    let spot_err = (suite.basic_inequality_spot - SPOT_VALUE).abs();
    outcome(
        unstable.is_empty() && spot_err <= SPOT_TOL,
        format!(
            "{} reports at a = b = {PROBE_B}, unstable {unstable:?}; spot ratio {:.9} (error {spot_err:.1e})",
            suite.reports.len() + 2,
            suite.basic_inequality_spot
        ),
    )
}

fn duhamel(suite: &skdv_core::harness::ProbeSuite) -> Result<Outcome> {
    let d = &suite.duhamel;
    outcome(
        d.trials == DUHAMEL_TRIALS && (d.slope - DUHAMEL_SLOPE).abs() <= DUHAMEL_TOL,
        format!("slope {:.4} over {} trials (expected {DUHAMEL_SLOPE} ± {DUHAMEL_TOL})", d.slope, d.trials),
    )
}

fn contraction() -> Result<Outcome> {
    let mut cfg = ExperimentConfig { scenario: Scenario::Contraction, ..Default::default() };
    cfg.contraction.r = CONTRACTION_R;
    cfg.contraction.times = CONTRACTION_TIMES.to_vec();
    cfg.contraction.pairs = CONTRACTION_PAIRS;
    let (r, _) = run_contraction(&cfg)?;
    let shortest = *r.max_factors.last().unwrap();
    let decreasing = r.max_factors.windows(2).all(|w| w[1] < w[0]);
    let pairs_ok = r.factors.iter().all(|f| f.len() == CONTRACTION_PAIRS);
    outcome(
        pairs_ok && shortest < 1.0 && decreasing,
        format!("max factors {:?} at T = {:?}", r.max_factors, r.times),
    )
}

fn counterexample() -> Result<Outcome> {
    let cfg = ExperimentConfig { scenario: Scenario::Counterexample, ..Default::default() };
    let (r, _) = run_counterexample(&cfg)?;
    let first = r.norms[0].sup_h1;
    let spread = r.norms.iter().map(|c| (c.sup_h1 - first).abs()).fold(0.0, f64::max);
    let ns: Vec<usize> = r.norms.iter().map(|c| c.n).collect();
    outcome(
        (r.r, r.q) == (2.0, 8.0) && ns == [4, 8, 16, 32] && spread <= SUP_TOL && (r.slope - COUNTER_SLOPE).abs() <= COUNTER_TOL,
        format!("sup-norm spread {spread:.1e}, mixed-norm slope {:.4} over n = {ns:?}", r.slope),
    )
}

fn hierarchy() -> Result<Outcome> {
    let cfg = ExperimentConfig { scenario: Scenario::Hierarchy, paths: HIERARCHY_PATHS, ..Default::default() };
    let (r, _) = run_hierarchy_convergence(&cfg)?;
    let monotone = [&r.k_sweep, &r.n_sweep, &r.m_sweep].iter().all(|s| !s.is_empty() && is_nonincreasing(s));
    let identities = r.inactive_k_gap <= IDENTITY_TOL && r.projection_gap <= IDENTITY_TOL;
    let diffs = |s: &[skdv_core::harness::SweepStep]| s.iter().map(|x| format!("{:.2e}", x.difference)).collect::<Vec<_>>();
    outcome(
        monotone && identities,
        format!(
            "{} paths; K {:?}, n {:?}, m {:?}; identity gaps {:.1e}, {:.1e}",
            r.paths,
            diffs(&r.k_sweep),
            diffs(&r.n_sweep),
            diffs(&r.m_sweep),
            r.inactive_k_gap,
            r.projection_gap
        ),
    )
}

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push((path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path)?));
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Result<Outcome> {
    let mut ensemble = ExperimentConfig { scenario: Scenario::Ensemble, paths: 6, seed: 11, ..Default::default() };
    ensemble.scheme.t0 = 0.1;
    ensemble.track_norms = true;
    let mut hierarchy = ExperimentConfig { scenario: Scenario::Hierarchy, paths: 2, seed: 5, ..Default::default() };
    hierarchy.scheme.t0 = 0.05;
    let counter = ExperimentConfig { scenario: Scenario::Counterexample, ..Default::default() };

    let root = std::env::temp_dir().join(format!("skdv-acceptance-{}", std::process::id()));
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for cfg in [&ensemble, &hierarchy, &counter] {
        let mut outputs = Vec::new();
        for (run_id, threads) in [(0, 1), (1, 1), (2, 4)] {
            let dir = root.join(format!("{}-{run_id}", cfg.scenario));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| skdv_core::Error::Internal(e.to_string()))?;
            pool.install(|| run(cfg, &dir))?;
            outputs.push(csv_files(&dir)?);
        }
        compared += outputs[0].len();
        if outputs[0].is_empty() || outputs.iter().any(|o| *o != outputs[0]) {
            mismatched.push(cfg.scenario.to_string());
        }
    }
    let _ = fs::remove_dir_all(&root);
    outcome(
        mismatched.is_empty(),
        format!("{compared} CSV files per run, 2 runs on 1 thread and 1 on 4 threads; mismatches {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let mut all = true;

    let t = Instant::now();
    all &= report(1, "linear propagators", secs(5), t, propagators());

    let t = Instant::now();
    all &= report(2, "deterministic conservation", secs(120), t, conservation());

    let t = Instant::now();
    match ensemble_rows() {
        Ok((cfg, rows)) => {
            all &= report(3, "Ito mass drift", secs(600), t, mass_drift(&cfg, &rows));
            all &= report(4, "moment boundedness", secs(1200), t, moments(&cfg, &rows));
        }
        Err(e) => {
            all &= report(3, "Ito mass drift", secs(600), t, Err(skdv_core::Error::Internal(e.to_string())));
            all &= report(4, "moment boundedness", secs(1200), t, Err(e));
        }
    }

    let t = Instant::now();
    match run_probes(&probe_config()) {
        Ok((suite, _)) => {
            all &= report(5, "Bourgain probes", secs(600), t, probes(&suite));
            all &= report(6, "Duhamel gain exponent", secs(300), t, duhamel(&suite));
        }
        Err(e) => {
            all &= report(5, "Bourgain probes", secs(600), t, Err(skdv_core::Error::Internal(e.to_string())));
            all &= report(6, "Duhamel gain exponent", secs(300), t, Err(e));
        }
    }

    let t = Instant::now();
    all &= report(7, "Picard contraction", secs(600), t, contraction());

    let t = Instant::now();
    all &= report(8, "mixed-norm counterexample", secs(60), t, counterexample());

    let t = Instant::now();
    all &= report(9, "hierarchy self-convergence", secs(900), t, hierarchy());

    let t = Instant::now();
    all &= report(10, "determinism", secs(300), t, determinism());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
