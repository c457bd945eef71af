use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use skdv_core::harness::{self, ExperimentConfig, Scenario};

/// Run one experiment scenario and write its diagnostics and summary.
#[derive(Debug, Parser)]
#[command(name = "skdv", version)]
struct Cli {
    /// simulate, ensemble, conserve, probe, contraction, counterexample or hierarchy.
    scenario: Scenario,
    /// JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ensemble size M.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T0")]
    t0: Option<f64>,
}

fn main() -> ExitCode {
    // Exit code 2 is reserved for failed verdicts, so usage errors exit with 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::from_path(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => ExperimentConfig::default(),
    };
    cfg.scenario = cli.scenario;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.paths {
        cfg.paths = m;
    }
    if let Some(dt) = cli.dt {
        cfg.scheme.dt = dt;
    }
    if let Some(t0) = cli.t0 {
        cfg.scheme.t0 = t0;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.display().to_string();
    }
    let out = PathBuf::from(&cfg.output);
    match harness::run(&cfg, &out) {
        Ok(summary) => {
            for v in &summary.verdicts {
                println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            println!("outputs in {}", out.display());
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
