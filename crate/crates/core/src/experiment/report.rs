//! Experiment reports and their on-disk layout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::functions::{write_table, Table};
use crate::metrics::mean_sd;

pub const REPORT_FILE: &str = "report.json";

/// How per-seed generators are derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub generator: String,
    pub derivation: String,
}

impl Default for RngProvenance {
    fn default() -> Self {
        RngProvenance {
            generator: "ChaCha8".into(),
            derivation: "each seed drives independent ChaCha streams; sub-seeds use a splitmix64 mix of (seed, index)"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    /// Metrics that could not be computed, with the reason.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metric_errors: BTreeMap<String, String>,
    /// Set when the whole seed failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub library_version: String,
    pub config: Value,
    pub rng: RngProvenance,
    pub seeds: Vec<SeedReport>,
    /// Mean and sample standard deviation of each metric over the seeds that produced it.
    pub aggregates: BTreeMap<String, Aggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn aggregate(seeds: &[SeedReport]) -> BTreeMap<String, Aggregate> {
        let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for s in seeds {
            for (k, v) in &s.metrics {
                by_metric.entry(k).or_default().push(*v);
            }
        }
        by_metric
            .into_iter()
            .filter_map(|(k, vs)| {
                let (mean, sd) = mean_sd(&vs)?;
                Some((k.to_string(), Aggregate { mean, sd, n: vs.len() }))
            })
            .collect()
    }

    /// Seeds that failed outright.
    pub fn failed_seeds(&self) -> Vec<u64> {
        self.seeds.iter().filter(|s| s.error.is_some()).map(|s| s.seed).collect()
    }

    pub fn metric(&self, seed: u64, name: &str) -> Option<f64> {
        self.seeds.iter().find(|s| s.seed == seed)?.metrics.get(name).copied()
    }

    /// Per-seed values of one metric, in seed order, skipping seeds without it.
    pub fn metric_values(&self, name: &str) -> Vec<f64> {
        self.seeds.iter().filter_map(|s| s.metrics.get(name).copied()).collect()
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(REPORT_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Human-readable summary.
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "experiment {} (delta-uq {})", self.experiment, self.library_version);
        let _ = writeln!(out, "seeds {}  wall clock {:.1}s", self.seeds.len(), self.wall_clock_s);
        let width = self.aggregates.keys().map(String::len).max().unwrap_or(0);
        for (k, a) in &self.aggregates {
            let _ = writeln!(out, "  {k:<width$}  {:>12.6} ± {:<10.6} (n={})", a.mean, a.sd, a.n);
        }
        for s in &self.seeds {
            if let Some(e) = &s.error {
                let _ = writeln!(out, "  seed {} failed: {e}", s.seed);
            }
            for (k, e) in &s.metric_errors {
                let _ = writeln!(out, "  seed {} {k}: {e}", s.seed);
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        out
    }
}

/// A file produced alongside the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub body: ArtifactBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactBody {
    Csv(Table),
    Json(Value),
}

impl Artifact {
    pub fn csv(file_name: impl Into<String>, table: Table) -> Self {
        Artifact {
            file_name: file_name.into(),
            body: ArtifactBody::Csv(table),
        }
    }

    pub fn json(file_name: impl Into<String>, value: Value) -> Self {
        Artifact {
            file_name: file_name.into(),
            body: ArtifactBody::Json(value),
        }
    }
}

/// A report plus the plot data it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<Artifact>,
}

impl ExperimentOutput {
    /// Writes `report.json` and every artifact into `dir`, creating it if
    /// needed. Returns the written paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.artifacts.len() + 1);
        let report = dir.join(REPORT_FILE);
        std::fs::write(&report, serde_json::to_string_pretty(&self.report)?).map_err(|e| Error::io(&report, e))?;
        written.push(report);
        for a in &self.artifacts {
            let path = dir.join(&a.file_name);
            match &a.body {
                ArtifactBody::Csv(t) => write_table(t, &path)?,
                ArtifactBody::Json(v) => {
                    std::fs::write(&path, serde_json::to_string_pretty(v)?).map_err(|e| Error::io(&path, e))?
                }
            }
            written.push(path);
        }
        Ok(written)
    }

    pub fn succeeded(&self) -> bool {
        self.report.failed_seeds().is_empty()
    }
}
