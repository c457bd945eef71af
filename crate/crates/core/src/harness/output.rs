use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use crate::error::{Error, Result};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One diagnostics sample; column order is the field order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub path_id: u64,
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub u_h1: f64,
    pub w_h1: f64,
    pub w_hdot_m38: f64,
    /// Running `X^t_{b,1}` norm; empty when norms are not tracked.
    pub x_norm: Option<f64>,
    pub y_norm: Option<f64>,
    pub sigma1_hit: bool,
    pub sigma2_hit: bool,
    pub blowup: bool,
}

pub const DIAGNOSTICS_HEADER: [&str; 13] = [
    "path_id", "t", "mass", "momentum", "energy", "u_h1", "w_h1", "w_hdot_m38", "x_norm", "y_norm", "sigma1_hit",
    "sigma2_hit", "blowup",
];

impl DiagnosticsRow {
    /// `‖u‖²_{H¹} + ‖w‖²_{H¹}`.
    pub fn h1_pair_sq(&self) -> f64 {
        self.u_h1 * self.u_h1 + self.w_h1 * self.w_h1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub paths: usize,
    pub verdicts: Vec<Verdict>,
    pub results: serde_json::Value,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Creates the output directory; every writer below goes through it.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_diagnostics(&self, rows: &[DiagnosticsRow]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(self.path(DIAGNOSTICS_FILE)).map_err(csv_err)?;
        w.write_record(DIAGNOSTICS_HEADER).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// A plot-ready CSV of equally long named columns.
    pub fn write_curves(&self, name: &str, columns: &[(&str, &[f64])]) -> Result<()> {
        let len = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != len) {
            return Err(Error::Internal(format!("curve file {name}: columns differ in length")));
        }
        let mut w = csv::Writer::from_path(self.path(name)).map_err(csv_err)?;
        w.write_record(columns.iter().map(|c| c.0)).map_err(csv_err)?;
        for i in 0..len {
            w.write_record(columns.iter().map(|c| format_number(c.1[i]))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != DIAGNOSTICS_HEADER {
        return Err(Error::Config(format!("unexpected diagnostics header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
