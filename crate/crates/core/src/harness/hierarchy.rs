use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::{Level, PathContext, PathRecord};
use super::output::Verdict;
use crate::dynamics::{ApproxParams, Hierarchy, State};
use crate::error::{Error, Result};
use crate::spectral::sobolev_norm;

/// Differences are compared with this relative slack so that two zero entries count as
/// nonincreasing.
const MONOTONE_SLACK: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Consecutive runs of one sweep: `E sup_t ‖(u,w)_{from} - (u,w)_{to}‖²_{𝓗¹}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    pub from: f64,
    pub to: f64,
    pub difference: f64,
    /// `difference / E sup_t ‖(u,w)_{to}‖²_{𝓗¹}`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub paths: usize,
    /// Largest `max(|u|², |w|)` reached by the untruncated runs.
    pub max_amplitude: f64,
    pub k_sweep: Vec<SweepStep>,
    pub n_sweep: Vec<SweepStep>,
    pub m_sweep: Vec<SweepStep>,
    /// `K` levels above the amplitude, compared with each other: `sup ‖·‖_{𝓗¹}`, relative.
    pub inactive_k_gap: f64,
    /// `mnK` against `mn` with `m = n` at the Nyquist wavenumber and `K = ∞`.
    pub projection_gap: f64,
    /// The same `mnK` run against the full system.
    pub full_gap: f64,
}

fn pair_sq(s: &State) -> Result<f64> {
    Ok(sobolev_norm(&s.u, 1.0, None)?.powi(2) + sobolev_norm(&s.w, 1.0, None)?.powi(2))
}

/// `sup_t ‖a(t) - b(t)‖²_{𝓗¹}` and `sup_t ‖b(t)‖²_{𝓗¹}` over the recorded states.
fn path_gap(a: &PathRecord, b: &PathRecord) -> Result<(f64, f64)> {
    if a.blowup.is_some() || b.blowup.is_some() {
        return Err(Error::Precondition(format!("path {} blew up during the convergence study", a.path_id)));
    }
    let mut gap: f64 = 0.0;
    let mut size: f64 = 0.0;
    for (x, y) in a.states.iter().zip(&b.states) {
        let du = x.u.sub(&y.u)?;
        let dw = x.w.sub(&y.w)?;
        gap = gap.max(sobolev_norm(&du, 1.0, None)?.powi(2) + sobolev_norm(&dw, 1.0, None)?.powi(2));
        size = size.max(pair_sq(y)?);
    }
    Ok((gap, size))
}

/// One path through every level of the study, sharing the noise path.
struct PathGaps {
    k: Vec<(f64, f64)>,
    n: Vec<(f64, f64)>,
    m: Vec<(f64, f64)>,
    inactive_k: f64,
    projection: f64,
    full: f64,
    amplitude: f64,
}

fn sweep(ctx: &PathContext, levels: &[Level], path_id: u64) -> Result<Vec<(f64, f64)>> {
    let runs = levels.iter().map(|l| ctx.run_path(l, path_id, true)).collect::<Result<Vec<_>>>()?;
    runs.windows(2).map(|w| path_gap(&w[0], &w[1])).collect()
}

fn relative_gap(a: &PathRecord, b: &PathRecord) -> Result<f64> {
    let (gap, size) = path_gap(a, b)?;
    Ok(if size > 0.0 { (gap / size).sqrt() } else { gap.sqrt() })
}

fn study_path(cfg: &ExperimentConfig, ctx: &PathContext, path_id: u64) -> Result<PathGaps> {
    let h = &cfg.hierarchy_study;
    let inf = f64::INFINITY;
    let base = ApproxParams { m: inf, n: inf, k: inf, r: inf };
    let full = ctx.run_path(&Level { hierarchy: Hierarchy::Full, approx: base }, path_id, true)?;

    let k_levels: Vec<Level> =
        h.k_values.iter().map(|&k| Level { hierarchy: Hierarchy::Mnk, approx: ApproxParams { k, ..base } }).collect();
    let m_fixed = cfg.mode_wavenumber(h.m_mode_for_n);
    let n_levels: Vec<Level> = h
        .n_modes
        .iter()
        .map(|&n| Level { hierarchy: Hierarchy::Mn, approx: ApproxParams { m: m_fixed, n: cfg.mode_wavenumber(n), ..base } })
        .collect();
    let m_levels: Vec<Level> = h
        .m_modes
        .iter()
        .map(|&m| Level { hierarchy: Hierarchy::M, approx: ApproxParams { m: cfg.mode_wavenumber(m), ..base } })
        .collect();

    let k_big = 2.0 * full.max_amplitude.max(0.5);
    let above = |k: f64| Level { hierarchy: Hierarchy::Mnk, approx: ApproxParams { k, ..base } };
    let inactive_k = relative_gap(&ctx.run_path(&above(k_big), path_id, true)?, &ctx.run_path(&above(2.0 * k_big), path_id, true)?)?;

    let nyq = ctx.grid.nyquist_wavenumber();
    let proj = ApproxParams { m: nyq, n: nyq, ..base };
    let mnk = ctx.run_path(&Level { hierarchy: Hierarchy::Mnk, approx: proj }, path_id, true)?;
    let mn = ctx.run_path(&Level { hierarchy: Hierarchy::Mn, approx: proj }, path_id, true)?;

    Ok(PathGaps {
        k: sweep(ctx, &k_levels, path_id)?,
        n: sweep(ctx, &n_levels, path_id)?,
        m: sweep(ctx, &m_levels, path_id)?,
        inactive_k,
        projection: relative_gap(&mnk, &mn)?,
        full: relative_gap(&mnk, &full)?,
        amplitude: full.max_amplitude,
    })
}

fn average(values: &[f64], per_path: &[Vec<(f64, f64)>]) -> Vec<SweepStep> {
    let paths = per_path.len().max(1) as f64;
    (0..values.len().saturating_sub(1))
        .map(|i| {
            let gap = per_path.iter().map(|p| p[i].0).sum::<f64>() / paths;
            let size = per_path.iter().map(|p| p[i].1).sum::<f64>() / paths;
            SweepStep {
                from: values[i],
                to: values[i + 1],
                difference: gap,
                relative: if size > 0.0 { gap / size } else { 0.0 },
            }
        })
        .collect()
}

pub fn is_nonincreasing(steps: &[SweepStep]) -> bool {
    steps.windows(2).all(|w| w[1].difference <= w[0].difference * (1.0 + MONOTONE_SLACK) + f64::MIN_POSITIVE)
}

/// The convergence table over `cfg.paths` paths and its verdicts.
pub fn run_hierarchy_convergence(cfg: &ExperimentConfig) -> Result<(HierarchyReport, Vec<Verdict>)> {
    let ctx = PathContext::from_config(cfg)?;
    let gaps: Vec<PathGaps> =
        (0..cfg.paths as u64).into_par_iter().map(|p| study_path(cfg, &ctx, p)).collect::<Result<_>>()?;
    let h = &cfg.hierarchy_study;
    let wave = |modes: &[usize]| modes.iter().map(|&j| cfg.mode_wavenumber(j)).collect::<Vec<_>>();
    let k_gaps: Vec<_> = gaps.iter().map(|g| g.k.clone()).collect();
    let n_gaps: Vec<_> = gaps.iter().map(|g| g.n.clone()).collect();
    let m_gaps: Vec<_> = gaps.iter().map(|g| g.m.clone()).collect();
    let worst = |f: fn(&PathGaps) -> f64| gaps.iter().map(f).fold(0.0, f64::max);
    let report = HierarchyReport {
        paths: gaps.len(),
        max_amplitude: worst(|g| g.amplitude),
        k_sweep: average(&h.k_values, &k_gaps),
        n_sweep: average(&wave(&h.n_modes), &n_gaps),
        m_sweep: average(&wave(&h.m_modes), &m_gaps),
        inactive_k_gap: worst(|g| g.inactive_k),
        projection_gap: worst(|g| g.projection),
        full_gap: worst(|g| g.full),
    };

    let mut verdicts = Vec::new();
    for (name, steps) in [("k_sweep", &report.k_sweep), ("n_sweep", &report.n_sweep), ("m_sweep", &report.m_sweep)] {
        let diffs: Vec<String> = steps.iter().map(|s| format!("{:.3e}", s.difference)).collect();
        verdicts.push(Verdict::new(
            format!("{name}_nonincreasing"),
            is_nonincreasing(steps),
            format!("differences [{}]", diffs.join(", ")),
        ));
    }
    if let Some(last) = report.n_sweep.last() {
        verdicts.push(Verdict::new(
            "n_sweep_final",
            last.relative < h.relative_tolerance,
            format!("final relative difference {:.3e} (limit {:e})", last.relative, h.relative_tolerance),
        ));
    }
    for (name, gap) in [
        ("inactive_k_identity", report.inactive_k_gap),
        ("projection_identity", report.projection_gap),
        ("full_identity", report.full_gap),
    ] {
        verdicts.push(Verdict::new(name, gap <= IDENTITY_TOLERANCE, format!("relative gap {gap:.3e}")));
    }
    Ok((report, verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(d: f64) -> SweepStep {
        SweepStep { from: 0.0, to: 1.0, difference: d, relative: 0.0 }
    }

    #[test]
    fn monotonicity_allows_ties_at_zero() {
        assert!(is_nonincreasing(&[step(1.0), step(0.5), step(0.0), step(0.0)]));
        assert!(!is_nonincreasing(&[step(1.0), step(2.0)]));
        assert!(is_nonincreasing(&[]));
    }

    #[test]
    fn tiny_study_runs() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.length = 16.0 * std::f64::consts::PI;
        cfg.grid.points = 128;
        cfg.scheme.dt = 2e-3;
        cfg.scheme.t0 = 0.02;
        cfg.paths = 2;
        cfg.noise.basis_size = 65;
        cfg.hierarchy_study.n_modes = vec![8, 16, 32];
        cfg.hierarchy_study.m_mode_for_n = 8;
        cfg.hierarchy_study.m_modes = vec![8, 16, 32];
        let (report, verdicts) = run_hierarchy_convergence(&cfg).unwrap();
        assert_eq!(report.paths, 2);
        assert_eq!(report.k_sweep.len(), 4);
        assert_eq!(report.n_sweep.len(), 2);
        for name in ["inactive_k_identity", "projection_identity"] {
            let v = verdicts.iter().find(|v| v.name == name).unwrap();
            assert!(v.passed, "{v:?}");
        }
        assert_eq!(report.inactive_k_gap, 0.0);
    }
}
