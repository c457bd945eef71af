use crate::bourgain::{BourgainWeight, RunningNorm, DEFAULT_B};
use crate::error::{ensure_finite, invalid, Result};
use crate::spectral::{ComplexField, Grid1D, RealField, SpaceTimeField, DEFAULT_PAD_FACTOR};

/// Running restricted norms `‖u‖_{X^t_{b,1}}`, `‖v‖_{Ỹ^t_{b,1}}` and the stopping times
/// `σ_R^{(i)}`, the first sample times at which the respective norm reaches `R`.
///
/// The sharp-cut prefix norm need not be monotone in `t`, so the tracker reports its running
/// maximum; that envelope is bounded above and below by the same constants as the sharp cut.
#[derive(Debug, Clone)]
pub struct StoppingTracker {
    r: f64,
    b: f64,
    x: RunningNorm,
    y: RunningNorm,
    y_hom: RunningNorm,
    times: Vec<f64>,
    x_history: Vec<f64>,
    y_history: Vec<f64>,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
}

impl StoppingTracker {
    /// `capacity` is the number of samples the run will record (steps + 1).
    pub fn new(grid: &Grid1D, dt: f64, capacity: usize, r: f64, b: f64) -> Result<Self> {
        if r.is_nan() || r < 0.0 {
            return invalid(format!("stopping radius must be >= 0, got {r}"));
        }
        ensure_finite("b", b)?;
        if !(0.0..0.5).contains(&b) {
            return invalid(format!("stopping-time norms need b in [0, 1/2), got {b}"));
        }
        let pad = DEFAULT_PAD_FACTOR;
        Ok(Self {
            r,
            b,
            x: RunningNorm::new(grid, dt, capacity, pad, &BourgainWeight::x(b, 1.0)?)?,
            y: RunningNorm::new(grid, dt, capacity, pad, &BourgainWeight::y(b, 1.0)?)?,
            y_hom: RunningNorm::new(grid, dt, capacity, pad, &BourgainWeight::y_homogeneous(b, 1.0)?)?,
            times: Vec::with_capacity(capacity),
            x_history: Vec::with_capacity(capacity),
            y_history: Vec::with_capacity(capacity),
            sigma1: None,
            sigma2: None,
        })
    }

    pub fn with_default_b(grid: &Grid1D, dt: f64, capacity: usize, r: f64) -> Result<Self> {
        Self::new(grid, dt, capacity, r, DEFAULT_B)
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    /// Records the sample at time `t` and updates the stopping times.
    pub fn record(&mut self, t: f64, u: &ComplexField, v: &RealField) -> Result<()> {
        self.x.push(u.values())?;
        let vc = v.to_complex();
        self.y.push(vc.values())?;
        self.y_hom.push(vc.values())?;
        let xn = self.x.envelope();
        let yn = self.y_history.last().copied().unwrap_or(0.0).max(self.y.value() + self.y_hom.value());
        self.times.push(t);
        self.x_history.push(xn);
        self.y_history.push(yn);
        if self.sigma1.is_none() && xn >= self.r {
            self.sigma1 = Some(t);
        }
        if self.sigma2.is_none() && yn >= self.r {
            self.sigma2 = Some(t);
        }
        Ok(())
    }

    /// Records every slice of a stored trajectory.
    pub fn update(&mut self, u: &SpaceTimeField, v: &SpaceTimeField) -> Result<()> {
        for k in 0..u.timesteps() {
            let uk = u.slice_field(k);
            let vk = v.slice_field(k).real_part();
            self.record(k as f64 * u.dt(), &uk, &vk)?;
        }
        Ok(())
    }

    pub fn x_norm(&self) -> f64 {
        self.x_history.last().copied().unwrap_or(0.0)
    }

    pub fn y_norm(&self) -> f64 {
        self.y_history.last().copied().unwrap_or(0.0)
    }

    pub fn x_history(&self) -> &[f64] {
        &self.x_history
    }

    pub fn y_history(&self) -> &[f64] {
        &self.y_history
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sigma1(&self) -> Option<f64> {
        self.sigma1
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }
}
