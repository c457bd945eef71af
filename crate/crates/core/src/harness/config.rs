use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bourgain::{DEFAULT_A, DEFAULT_B};
use crate::dynamics::{ApproxParams, Hierarchy, Scheme, SchemeConfig, SystemParams};
use crate::error::{Error, Result};
use crate::noise::{KernelSpec, NoiseOperator, DEFAULT_BASIS_SIZE};
use crate::spectral::{check_edge_decay, zero_nyquist, ComplexField, Grid1D, RealField, DEFAULT_LENGTH, DEFAULT_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Simulate,
    Ensemble,
    Conserve,
    Probe,
    Contraction,
    Counterexample,
    Hierarchy,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Simulate,
        Scenario::Ensemble,
        Scenario::Conserve,
        Scenario::Probe,
        Scenario::Contraction,
        Scenario::Counterexample,
        Scenario::Hierarchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Ensemble => "ensemble",
            Scenario::Conserve => "conserve",
            Scenario::Probe => "probe",
            Scenario::Contraction => "contraction",
            Scenario::Counterexample => "counterexample",
            Scenario::Hierarchy => "hierarchy",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub length: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { length: DEFAULT_LENGTH, points: DEFAULT_POINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub phi: KernelSpec,
    pub psi: KernelSpec,
    pub basis_size: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { enabled: true, phi: KernelSpec::default(), psi: KernelSpec::default(), basis_size: DEFAULT_BASIS_SIZE }
    }
}

/// `amplitude·exp(-(x - center)²/(2 width²))·e^{i wavenumber x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchrodingerData {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub wavenumber: f64,
}

impl Default for SchrodingerData {
    fn default() -> Self {
        Self { amplitude: 1.0, width: 2.0, center: 0.0, wavenumber: 0.5 }
    }
}

/// `amplitude·exp(-(x - center)²/(2 width²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdvData {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

impl Default for KdvData {
    fn default() -> Self {
        Self { amplitude: 0.5, width: 2.0, center: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub u: SchrodingerData,
    pub w: KdvData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConserveConfig {
    /// Step sizes of the convergence study, coarse to fine; the last one is held to the drift bound.
    pub dts: Vec<f64>,
    pub max_drift: f64,
    pub min_order: f64,
    /// Allowance for the pre-asymptotic error of an observed order.
    pub order_slack: f64,
}

impl Default for ConserveConfig {
    fn default() -> Self {
        Self { dts: vec![1e-3, 5e-4, 2.5e-4], max_drift: 1e-6, min_order: 2.0, order_slack: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub a: f64,
    pub b: f64,
    pub trials: usize,
    /// Power nonlinearities probed.
    pub powers: Vec<u32>,
    pub embedding_b: f64,
    pub duhamel_times: Vec<f64>,
    pub duhamel_trials: usize,
    pub localization_r: f64,
    pub stochastic: StochasticProbeConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            a: DEFAULT_A,
            b: DEFAULT_B,
            trials: 100,
            powers: vec![2, 3, 4],
            embedding_b: 0.75,
            duhamel_times: vec![0.05, 0.1, 0.2, 0.4],
            duhamel_trials: 20,
            localization_r: 2.0,
            stochastic: StochasticProbeConfig::default(),
        }
    }
}

/// Monte Carlo probe of the stochastic convolution along a frozen free Schrödinger path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StochasticProbeConfig {
    pub enabled: bool,
    pub b: f64,
    pub order: u32,
    pub paths: usize,
    pub span: f64,
    pub samples: usize,
    pub grid: GridConfig,
    pub tolerance: f64,
}

impl Default for StochasticProbeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            b: DEFAULT_B,
            order: 1,
            paths: 400,
            span: 1.0,
            samples: 128,
            grid: GridConfig { length: 16.0 * std::f64::consts::PI, points: 128 },
            tolerance: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionConfig {
    pub r: f64,
    pub b: f64,
    /// Decreasing list of horizons; the last one is held to `factor < 1`.
    pub times: Vec<f64>,
    pub pairs: usize,
    pub samples: usize,
    pub grid: GridConfig,
    pub noise: bool,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            r: 2.0,
            b: DEFAULT_B,
            times: vec![0.2, 0.1, 0.05],
            pairs: 20,
            samples: 64,
            grid: GridConfig { length: 16.0 * std::f64::consts::PI, points: 128 },
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub r: f64,
    pub q: f64,
    pub n_values: Vec<usize>,
    pub expected_slope: f64,
    pub slope_tolerance: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self { r: 2.0, q: 8.0, n_values: vec![4, 8, 16, 32], expected_slope: 0.375, slope_tolerance: 0.05 }
    }
}

/// Cutoff sweeps of the convergence study. Frequency cutoffs are given as mode indices `j`,
/// meaning wavenumbers `2πj/L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyStudyConfig {
    pub k_values: Vec<f64>,
    pub n_modes: Vec<usize>,
    /// Fixed `m` of the `n` sweep.
    pub m_mode_for_n: usize,
    pub m_modes: Vec<usize>,
    pub relative_tolerance: f64,
}

impl Default for HierarchyStudyConfig {
    fn default() -> Self {
        Self {
            k_values: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            n_modes: vec![32, 64, 128],
            m_mode_for_n: 32,
            m_modes: vec![32, 64, 128],
            relative_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Ensemble size `M`.
    pub paths: usize,
    pub grid: GridConfig,
    pub system: SystemParams,
    pub approx: ApproxParams,
    pub hierarchy: Hierarchy,
    pub scheme: SchemeConfig,
    pub noise: NoiseConfig,
    pub initial: InitialData,
    /// Moment order `l`.
    pub moment_order: u32,
    /// Number of equally spaced moment checkpoints in `(0, T0]`.
    pub checkpoints: usize,
    /// Diagnostics are written every this many steps (checkpoints are always written).
    pub record_every: u64,
    /// Track running Bourgain norms on non-localized runs.
    pub track_norms: bool,
    /// Largest tolerated fraction of blown-up paths.
    pub max_blowup_fraction: f64,
    pub output: String,
    pub conserve: ConserveConfig,
    pub probe: ProbeConfig,
    pub contraction: ContractionConfig,
    pub counterexample: CounterexampleConfig,
    pub hierarchy_study: HierarchyStudyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            seed: 0,
            paths: 1,
            grid: GridConfig::default(),
            system: SystemParams::default(),
            approx: ApproxParams::default(),
            hierarchy: Hierarchy::default(),
            scheme: SchemeConfig::default(),
            noise: NoiseConfig::default(),
            initial: InitialData::default(),
            moment_order: 1,
            checkpoints: 5,
            record_every: 1,
            track_norms: false,
            max_blowup_fraction: 0.1,
            output: "out".into(),
            conserve: ConserveConfig::default(),
            probe: ProbeConfig::default(),
            contraction: ContractionConfig::default(),
            counterexample: CounterexampleConfig::default(),
            hierarchy_study: HierarchyStudyConfig::default(),
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn decreasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

fn increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every parameter block, builds the grid, the kernels and the initial data once.
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.approx.validate()?;
        self.scheme.validate()?;
        let grid = self.grid()?;
        if self.scheme.scheme == Scheme::StrangRk4 && self.noise.enabled && self.scenario != Scenario::Conserve {
            return config_err("the strang_rk4 scheme is deterministic; set noise.enabled = false");
        }
        if self.noise.enabled {
            self.noise_operators(&grid)?;
        }
        self.initial_data(&grid)?;
        if self.moment_order == 0 {
            return config_err("moment_order must be >= 1");
        }
        if self.checkpoints == 0 || self.checkpoints as u64 > self.scheme.steps() {
            return config_err("checkpoints must lie in [1, number of steps]");
        }
        if self.record_every == 0 {
            return config_err("record_every must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.max_blowup_fraction) {
            return config_err("max_blowup_fraction must lie in [0, 1]");
        }
        if self.hierarchy == Hierarchy::Localized && self.approx.r.is_infinite() {
            return config_err("the localized hierarchy needs a finite R");
        }

        let c = &self.conserve;
        if c.dts.len() < 3 || !decreasing(&c.dts) || c.dts.iter().any(|&d| d <= 0.0 || !d.is_finite()) {
            return config_err("conserve.dts needs at least three positive, strictly decreasing step sizes");
        }

        let p = &self.probe;
        for (name, v) in [("probe.a", p.a), ("probe.b", p.b)] {
            if !(v > 0.0 && v < 0.5) {
                return config_err(format!("{name} must lie in (0, 1/2), got {v}"));
            }
        }
        if p.trials == 0 || p.duhamel_trials == 0 {
            return config_err("probe trial counts must be positive");
        }
        if p.powers.iter().any(|&a| a < 2) {
            return config_err("probe.powers must be >= 2");
        }
        if p.duhamel_times.len() < 2 || !increasing(&p.duhamel_times) || p.duhamel_times[0] <= 0.0 {
            return config_err("probe.duhamel_times needs at least two positive increasing times");
        }
        let s = &p.stochastic;
        if !(0.0..0.5).contains(&s.b) {
            return config_err(format!("probe.stochastic.b must lie in [0, 1/2), got {}", s.b));
        }
        if s.order == 0 || s.paths < 2 || s.samples < 4 || !(s.span > 0.0) {
            return config_err("probe.stochastic needs order >= 1, paths >= 2, samples >= 4, span > 0");
        }
        Grid1D::new(s.grid.length, s.grid.points)?;

        let k = &self.contraction;
        if !(k.r > 0.0) || !(0.0..0.5).contains(&k.b) {
            return config_err("contraction needs R > 0 and b in [0, 1/2)");
        }
        if k.times.is_empty() || !decreasing(&k.times) || k.times.iter().any(|&t| t <= 0.0) {
            return config_err("contraction.times must be positive and strictly decreasing");
        }
        if k.pairs == 0 || k.samples < 4 {
            return config_err("contraction needs pairs >= 1 and samples >= 4");
        }
        Grid1D::new(k.grid.length, k.grid.points)?;

        let e = &self.counterexample;
        if e.n_values.len() < 2 || !increasing(&e.n_values) || e.n_values[0] == 0 {
            return config_err("counterexample.n_values needs at least two increasing positive entries");
        }

        let h = &self.hierarchy_study;
        if !increasing(&h.k_values) || h.k_values.iter().any(|&k| !(k > 0.0)) {
            return config_err("hierarchy_study.k_values must be positive and increasing");
        }
        if !increasing(&h.n_modes) || !increasing(&h.m_modes) {
            return config_err("hierarchy_study mode lists must be increasing");
        }
        if h.m_modes.first() == Some(&0) || h.m_mode_for_n == 0 {
            return config_err("hierarchy_study modes must be positive");
        }
        if let Some(&n) = h.n_modes.iter().find(|&&n| n < h.m_mode_for_n) {
            return config_err(format!("hierarchy_study needs n >= m (n = {n}, m = {})", h.m_mode_for_n));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.length, self.grid.points)
    }

    pub fn noise_operators(&self, grid: &Grid1D) -> Result<(NoiseOperator, NoiseOperator)> {
        self.noise_operators_with(grid, self.noise.basis_size)
    }

    /// Operators on the smaller grids of the probes, with the basis cut to fit the grid.
    pub fn auxiliary_noise_operators(&self, grid: &Grid1D) -> Result<(NoiseOperator, NoiseOperator)> {
        let fit = if grid.points() % 2 == 0 { grid.points() - 1 } else { grid.points() };
        self.noise_operators_with(grid, self.noise.basis_size.min(fit))
    }

    fn noise_operators_with(&self, grid: &Grid1D, basis: usize) -> Result<(NoiseOperator, NoiseOperator)> {
        Ok((
            NoiseOperator::from_spec(grid, &self.noise.phi, basis, "phi")?,
            NoiseOperator::from_spec(grid, &self.noise.psi, basis, "psi")?,
        ))
    }

    /// Gaussian data with the Nyquist mode removed; fails if the data reach the box edges.
    pub fn initial_data(&self, grid: &Grid1D) -> Result<(ComplexField, RealField)> {
        let (a, b) = (self.initial.u, self.initial.w);
        for (name, width) in [("initial.u.width", a.width), ("initial.w.width", b.width)] {
            if !(width > 0.0) {
                return config_err(format!("{name} must be positive"));
            }
        }
        let u = ComplexField::from_fn(grid, |x| {
            Complex64::from_polar(a.amplitude * (-(x - a.center).powi(2) / (2.0 * a.width * a.width)).exp(), a.wavenumber * x)
        });
        let w = RealField::from_fn(grid, |x| b.amplitude * (-(x - b.center).powi(2) / (2.0 * b.width * b.width)).exp());
        check_edge_decay("initial u", u.values())?;
        check_edge_decay("initial w", w.to_complex().values())?;
        Ok((zero_nyquist(&u), zero_nyquist(&w)))
    }

    /// Mode index `j` as the wavenumber `2πj/L`.
    pub fn mode_wavenumber(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.grid.length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(text.contains("\"K\": \"inf\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"sceanrio": "probe"}"#), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"system": {"gamma1": 1.0, "gamma2": -1.0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"approx": {"m": 4, "n": 2}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"approx": {"K": "big"}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"initial": {"u": {"width": 40.0}}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"hierarchy_study": {"n_modes": [8, 16], "m_mode_for_n": 12}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"probe": {"stochastic": {"b": 0.5}}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scheme": {"scheme": "strang_rk4"}}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"approx": {"K": 3, "R": "inf"}, "scenario": "hierarchy"}"#).unwrap();
        assert_eq!(cfg.approx.k, 3.0);
        assert_eq!(cfg.scenario, Scenario::Hierarchy);
    }

    #[test]
    fn scenario_names() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("walk".parse::<Scenario>().is_err());
    }
}
