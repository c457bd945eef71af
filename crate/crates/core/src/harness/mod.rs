//! Configuration, experiment orchestration and output files.

mod config;
mod ensemble;
mod hierarchy;
mod output;
mod scenarios;

pub use config::{
    ConserveConfig, ContractionConfig, CounterexampleConfig, ExperimentConfig, GridConfig, HierarchyStudyConfig,
    InitialData, KdvData, NoiseConfig, ProbeConfig, Scenario, SchrodingerData, StochasticProbeConfig,
};
pub use ensemble::{
    checkpoint_steps, diagnostics_row, ensemble_inputs, evaluate_ensemble, run_ensemble, EnsembleInputs,
    EnsembleReport, Level, PathContext, PathRecord,
};
pub use hierarchy::{is_nonincreasing, run_hierarchy_convergence, HierarchyReport, SweepStep, IDENTITY_TOLERANCE};
pub use output::{
    read_diagnostics, read_summary, DiagnosticsRow, OutputDir, Summary, Verdict, DIAGNOSTICS_FILE,
    DIAGNOSTICS_HEADER, SUMMARY_FILE,
};
pub use scenarios::{
    run_conserve, run_contraction, run_counterexample, run_probes, run_stochastic_convolution_probe,
    ConserveReport, ContractionReport, CounterexampleReport, ProbeSuite, StochasticProbeReport,
    BASIC_SPOT_VALUE, BASIC_SPOT_TOLERANCE, DRIFT_FLOOR, DUHAMEL_SLOPE_TOLERANCE, SUP_NORM_TOLERANCE,
};

use std::path::Path;

use crate::error::Result;

/// Runs `cfg.scenario`, writes every output file into `out` and returns the summary.
///
/// Every scenario writes `diagnostics.csv` (header-only when it steps no paths) and
/// `summary.json`; the others are scenario specific.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    cfg.validate()?;
    let dir = OutputDir::create(out)?;
    let mut rows: Vec<DiagnosticsRow> = Vec::new();
    let (paths, verdicts, results) = match cfg.scenario {
        Scenario::Simulate => {
            let ctx = PathContext::from_config(cfg)?;
            let rec = ctx.run_path(&Level { hierarchy: cfg.hierarchy, approx: cfg.approx }, 0, false)?;
            let verdicts = vec![Verdict::new(
                "no_blowup",
                rec.blowup.is_none(),
                rec.blowup.map_or("path reached T0".into(), |t| format!("blow-up at t = {t}")),
            )];
            let results = serde_json::json!({
                "blowup": rec.blowup,
                "max_amplitude": rec.max_amplitude,
                "final": rec.rows.last(),
            });
            rows = rec.rows;
            (1, verdicts, results)
        }
        Scenario::Ensemble => {
            let (r, report, verdicts) = run_ensemble(cfg)?;
            rows = r;
            let m = &report.moments;
            let oracle = report.mass_oracle.clone().unwrap_or_else(|| vec![f64::NAN; m.times.len()]);
            dir.write_curves(
                "moments.csv",
                &[
                    ("t", &m.times),
                    ("moment", &m.estimates),
                    ("moment_se", &m.std_errors),
                    ("mass", &report.mass.estimates),
                    ("mass_se", &report.mass.std_errors),
                    ("mass_oracle", &oracle),
                ],
            )?;
            (report.paths, verdicts, serde_json::to_value(&report)?)
        }
        Scenario::Conserve => {
            let (report, verdicts) = run_conserve(cfg)?;
            dir.write_curves(
                "conservation.csv",
                &[
                    ("dt", &report.dts),
                    ("mass_drift", &report.mass_drift),
                    ("momentum_drift", &report.momentum_drift),
                    ("energy_drift", &report.energy_drift),
                ],
            )?;
            (cfg.conserve.dts.len(), verdicts, serde_json::to_value(&report)?)
        }
        Scenario::Probe => {
            let (suite, verdicts) = run_probes(cfg)?;
            for r in &suite.reports {
                dir.write_json(&format!("probe_{}.json", r.lemma), r)?;
            }
            dir.write_json("probe_duhamel_gain.json", &suite.duhamel)?;
            dir.write_json("probe_localization.json", &suite.localization)?;
            if let Some(s) = &suite.stochastic {
                dir.write_json("probe_stochastic_convolution.json", s)?;
            }
            dir.write_curves(
                "duhamel_gain.csv",
                &[("T", &suite.duhamel.times), ("mean_ratio", &suite.duhamel.mean_ratios)],
            )?;
            let paths = suite.stochastic.as_ref().map_or(0, |s| s.paths);
            (paths, verdicts, serde_json::to_value(&suite)?)
        }
        Scenario::Contraction => {
            let (report, verdicts) = run_contraction(cfg)?;
            dir.write_curves(
                "contraction.csv",
                &[("T", &report.times), ("max_factor", &report.max_factors), ("mean_factor", &report.mean_factors)],
            )?;
            (0, verdicts, serde_json::to_value(&report)?)
        }
        Scenario::Counterexample => {
            let (report, verdicts) = run_counterexample(cfg)?;
            let n: Vec<f64> = report.norms.iter().map(|c| c.n as f64).collect();
            let sup: Vec<f64> = report.norms.iter().map(|c| c.sup_h1).collect();
            let mixed: Vec<f64> = report.norms.iter().map(|c| c.mixed).collect();
            dir.write_curves("counterexample.csv", &[("n", &n), ("sup_h1", &sup), ("mixed", &mixed)])?;
            (0, verdicts, serde_json::to_value(&report)?)
        }
        Scenario::Hierarchy => {
            let (report, verdicts) = run_hierarchy_convergence(cfg)?;
            for (name, steps) in [("k", &report.k_sweep), ("n", &report.n_sweep), ("m", &report.m_sweep)] {
                let to: Vec<f64> = steps.iter().map(|s| s.to).collect();
                let d: Vec<f64> = steps.iter().map(|s| s.difference).collect();
                let rel: Vec<f64> = steps.iter().map(|s| s.relative).collect();
                dir.write_curves(&format!("hierarchy_{name}.csv"), &[("to", &to), ("difference", &d), ("relative", &rel)])?;
            }
            (report.paths, verdicts, serde_json::to_value(&report)?)
        }
    };
    dir.write_diagnostics(&rows)?;
    let summary = Summary { scenario: cfg.scenario, config: cfg.clone(), seed: cfg.seed, paths, verdicts, results };
    dir.write_json(SUMMARY_FILE, &summary)?;
    Ok(summary)
}
