//! Configured, multi-seed experiments producing self-contained reports.
//!
//! A run validates the configuration, executes every seed (a failing seed
//! is recorded and the others still run), then assembles an
//! [`ExperimentReport`] with per-seed metrics and their aggregates.

mod config;
mod report;
mod runs;

use std::time::Instant;

pub use config::{
    AnchorAblation, CalibrationShift, DataSource, EncodingAblation, Experiment, ExperimentConfig, MboExperiment,
    MoonsSpec, OodExperiment, PriorChoice, RegressionCalibration, SmoExperiment,
};
pub use report::{
    Aggregate, Artifact, ArtifactBody, ExperimentOutput, ExperimentReport, RngProvenance, SeedReport, REPORT_FILE,
};
pub use runs::SeedOutcome;

use crate::error::Result;

/// Runs one seed of `cfg`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    match &cfg.experiment {
        Experiment::RegressionCalibration(c) => runs::regression_calibration(c, seed),
        Experiment::EncodingAblation(c) => runs::encoding_ablation(c, seed),
        Experiment::Smo(c) => runs::smo(c, seed),
        Experiment::Mbo(c) => runs::mbo(c, seed),
        Experiment::Ood(c) => runs::ood(c, seed),
        Experiment::CalibrationShift(c) => runs::calibration_shift(c, seed),
        Experiment::AnchorAblation(c) => runs::anchor_ablation(c, seed),
    }
}

/// Result of one seed with its wall-clock time in seconds.
pub type SeedRun = (u64, Result<SeedOutcome>, f64);

/// Times `run_seed`.
pub fn timed_seed(cfg: &ExperimentConfig, seed: u64) -> SeedRun {
    let start = Instant::now();
    let outcome = run_seed(cfg, seed);
    if let Err(e) = &outcome {
        log::error!("seed {seed} failed: {e}");
    }
    (seed, outcome, start.elapsed().as_secs_f64())
}

/// Builds the report from seed results given in any order.
pub fn assemble(cfg: &ExperimentConfig, mut runs: Vec<SeedRun>, wall_clock_s: f64) -> Result<ExperimentOutput> {
    let order = |s: u64| cfg.seeds.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    runs.sort_by_key(|(s, _, _)| order(*s));
    let mut seeds = Vec::with_capacity(runs.len());
    let mut artifacts = Vec::new();
    for (seed, outcome, secs) in runs {
        match outcome {
            Ok(o) => {
                artifacts.extend(o.artifacts);
                seeds.push(SeedReport {
                    seed,
                    metrics: o.metrics,
                    metric_errors: o.metric_errors,
                    error: None,
                    wall_clock_s: secs,
                });
            }
            Err(e) => seeds.push(SeedReport {
                seed,
                metrics: Default::default(),
                metric_errors: Default::default(),
                error: Some(e.to_string()),
                wall_clock_s: secs,
            }),
        }
    }
    let report = ExperimentReport {
        experiment: cfg.experiment.name().into(),
        library_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_value()?,
        rng: RngProvenance::default(),
        aggregates: ExperimentReport::aggregate(&seeds),
        seeds,
        warnings: warnings(cfg),
        wall_clock_s,
    };
    Ok(ExperimentOutput { report, artifacts })
}

/// Non-fatal configuration notes, also logged.
pub fn warnings(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Experiment::AnchorAblation(c) = &cfg.experiment {
        let (_, dropped) = runs::dedup_k(&c.k_values);
        if !dropped.is_empty() {
            out.push(format!("duplicate anchor counts {dropped:?} were dropped from the sweep"));
        }
    }
    if let Experiment::CalibrationShift(_) = &cfg.experiment {
        out.push(format!(
            "NLL uses a probability floor of {}",
            crate::metrics::NLL_PROBABILITY_FLOOR
        ));
    }
    let mut sorted = cfg.seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cfg.seeds.len() {
        out.push("seed list contains duplicates".into());
    }
    out
}

/// Validates and runs every seed sequentially.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    for w in warnings(cfg) {
        log::warn!("{w}");
    }
    let start = Instant::now();
    let runs = cfg.seeds.iter().map(|&s| timed_seed(cfg, s)).collect();
    assemble(cfg, runs, start.elapsed().as_secs_f64())
}
