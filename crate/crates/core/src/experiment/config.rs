//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::encoding::{AnchorPrior, EncodingScheme, LogitScaling};
use crate::error::{Error, Result};
use crate::functions::{BenchmarkFn, CorruptionKind, TargetColumn};
use crate::learners::{BaselineKind, ForestConfig, LearnerConfig, MlpConfig};
use crate::mbo::MboConfig;
use crate::smo::SmoConfig;

/// Where regression data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// A CSV file split into train and test rows per seed.
    Csv {
        path: PathBuf,
        target: TargetColumn,
        /// Rows used for training; the rest form the test set.
        n_train: usize,
    },
    /// Uniform samples over a benchmark function's domain box.
    Function {
        function: BenchmarkFn,
        n_train: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
    },
}

fn default_n_test() -> usize {
    1000
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Function {
            function: BenchmarkFn::Griewank { dim: 2 },
            n_train: 200,
            n_test: default_n_test(),
        }
    }
}

/// Prior used for anchors at training and inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorChoice {
    #[default]
    TrainDistribution,
    StandardNormal,
}

impl PriorChoice {
    pub(crate) fn build(self, train_inputs: &ndarray::Array2<f64>) -> Result<AnchorPrior> {
        match self {
            PriorChoice::TrainDistribution => AnchorPrior::train_distribution(train_inputs),
            PriorChoice::StandardNormal => AnchorPrior::standard_normal(train_inputs.ncols()),
        }
    }
}

/// Two-moons generator settings shared by the classification experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoonsSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sd: f64,
}

impl Default for MoonsSpec {
    fn default() -> Self {
        MoonsSpec {
            n_train: 500,
            n_test: 500,
            noise_sd: 0.1,
        }
    }
}

fn classifier() -> MlpConfig {
    MlpConfig {
        hidden_layers: vec![64, 64],
        epochs: 100,
        ..MlpConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionCalibration {
    pub data: DataSource,
    pub learner: LearnerConfig,
    pub scheme: EncodingScheme,
    pub prior: PriorChoice,
    pub anchors: usize,
    /// Optional non-anchored comparison model.
    pub baseline: Option<BaselineKind>,
}

impl Default for RegressionCalibration {
    fn default() -> Self {
        RegressionCalibration {
            data: DataSource::default(),
            learner: LearnerConfig::default(),
            scheme: EncodingScheme::SingleAnchor,
            prior: PriorChoice::default(),
            anchors: 10,
            baseline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingAblation {
    pub data: DataSource,
    pub learner: LearnerConfig,
    pub schemes: Vec<EncodingScheme>,
    pub prior: PriorChoice,
    pub anchors: usize,
}

impl Default for EncodingAblation {
    fn default() -> Self {
        EncodingAblation {
            data: DataSource::default(),
            learner: LearnerConfig::Forest(ForestConfig {
                n_trees: 5,
                anchor_replication: 5,
                ..ForestConfig::default()
            }),
            schemes: EncodingScheme::ALL.to_vec(),
            prior: PriorChoice::default(),
            anchors: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoExperiment {
    pub smo: SmoConfig,
}


#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MboExperiment {
    pub mbo: MboConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OodExperiment {
    pub moons: MoonsSpec,
    pub learner: MlpConfig,
    /// Each scheme is trained and scored on the same splits.
    pub schemes: Vec<EncodingScheme>,
    pub anchors: usize,
    pub scaling: LogitScaling,
    /// The OOD box is the training bounding box inflated by this factor.
    pub box_inflation: f64,
    pub n_ood: usize,
}

impl Default for OodExperiment {
    fn default() -> Self {
        OodExperiment {
            moons: MoonsSpec::default(),
            learner: classifier(),
            schemes: vec![EncodingScheme::SingleAnchor, EncodingScheme::Identity],
            anchors: 10,
            scaling: LogitScaling::default(),
            box_inflation: 1.5,
            n_ood: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationShift {
    pub moons: MoonsSpec,
    pub learner: MlpConfig,
    pub scheme: EncodingScheme,
    pub anchors: usize,
    pub scaling: LogitScaling,
    pub corruption: CorruptionKind,
    pub intensities: Vec<u8>,
    pub bins: usize,
}

impl Default for CalibrationShift {
    fn default() -> Self {
        CalibrationShift {
            moons: MoonsSpec::default(),
            learner: classifier(),
            scheme: EncodingScheme::SingleAnchor,
            anchors: 10,
            scaling: LogitScaling::default(),
            corruption: CorruptionKind::GaussianNoise,
            intensities: vec![1, 2, 3, 4, 5],
            bins: crate::metrics::DEFAULT_ECE_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorAblation {
    pub moons: MoonsSpec,
    pub learner: MlpConfig,
    pub scheme: EncodingScheme,
    /// Anchor counts to evaluate; duplicates are dropped.
    pub k_values: Vec<usize>,
    pub corruption: CorruptionKind,
    pub intensity: u8,
}

impl Default for AnchorAblation {
    fn default() -> Self {
        AnchorAblation {
            moons: MoonsSpec::default(),
            learner: classifier(),
            scheme: EncodingScheme::SingleAnchor,
            k_values: vec![2, 5, 10, 25, 50],
            corruption: CorruptionKind::GaussianNoise,
            intensity: 3,
        }
    }
}

/// One experiment and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    RegressionCalibration(RegressionCalibration),
    EncodingAblation(EncodingAblation),
    Smo(SmoExperiment),
    Mbo(MboExperiment),
    Ood(OodExperiment),
    CalibrationShift(CalibrationShift),
    AnchorAblation(AnchorAblation),
}

impl Experiment {
    pub const NAMES: [&'static str; 7] = [
        "regression-calibration",
        "encoding-ablation",
        "smo",
        "mbo",
        "ood",
        "calibration-shift",
        "anchor-ablation",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::RegressionCalibration(_) => "regression-calibration",
            Experiment::EncodingAblation(_) => "encoding-ablation",
            Experiment::Smo(_) => "smo",
            Experiment::Mbo(_) => "mbo",
            Experiment::Ood(_) => "ood",
            Experiment::CalibrationShift(_) => "calibration-shift",
            Experiment::AnchorAblation(_) => "anchor-ablation",
        }
    }

    fn body(&self) -> Result<Value> {
        Ok(match self {
            Experiment::RegressionCalibration(c) => serde_json::to_value(c)?,
            Experiment::EncodingAblation(c) => serde_json::to_value(c)?,
            Experiment::Smo(c) => serde_json::to_value(c)?,
            Experiment::Mbo(c) => serde_json::to_value(c)?,
            Experiment::Ood(c) => serde_json::to_value(c)?,
            Experiment::CalibrationShift(c) => serde_json::to_value(c)?,
            Experiment::AnchorAblation(c) => serde_json::to_value(c)?,
        })
    }
}

/// A full configuration document: `{"experiment": "...", "seeds": [...], ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    /// Output directory when neither the command line nor the environment
    /// names one.
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            experiment,
            seeds,
            output: None,
        }
    }

    /// Parses a document; `origin` labels errors.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let config_err = |message: String| Error::Config {
            path: origin.display().to_string(),
            message,
        };
        let value: Value = serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(config_err("top level must be a JSON object".into()));
        };
        let name = match map.remove("experiment") {
            Some(Value::String(s)) => s,
            Some(other) => return Err(config_err(format!("experiment: expected a string, found {other}"))),
            None => return Err(config_err(format!("experiment: missing; expected one of {}", Experiment::NAMES.join(", ")))),
        };
        let seeds: Vec<u64> = take_field(&mut map, "seeds", origin)?
            .ok_or_else(|| config_err("seeds: missing".into()))?;
        let output: Option<PathBuf> = take_field(&mut map, "output", origin)?;
        let body = Value::Object(map);
        let experiment = match name.as_str() {
            "regression-calibration" => Experiment::RegressionCalibration(parse_body(body, origin)?),
            "encoding-ablation" => Experiment::EncodingAblation(parse_body(body, origin)?),
            "smo" => Experiment::Smo(parse_body(body, origin)?),
            "mbo" => Experiment::Mbo(parse_body(body, origin)?),
            "ood" => Experiment::Ood(parse_body(body, origin)?),
            "calibration-shift" => Experiment::CalibrationShift(parse_body(body, origin)?),
            "anchor-ablation" => Experiment::AnchorAblation(parse_body(body, origin)?),
            other => {
                return Err(config_err(format!(
                    "experiment: unknown value {other:?}; expected one of {}",
                    Experiment::NAMES.join(", ")
                )))
            }
        };
        let mut cfg = ExperimentConfig {
            experiment,
            seeds,
            output,
        };
        if let Some(dir) = origin.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// The flat JSON form, as echoed in reports.
    pub fn to_value(&self) -> Result<Value> {
        let mut map = Map::new();
        map.insert("experiment".into(), Value::String(self.experiment.name().into()));
        map.insert("seeds".into(), serde_json::to_value(&self.seeds)?);
        if let Some(out) = &self.output {
            map.insert("output".into(), serde_json::to_value(out)?);
        }
        if let Value::Object(body) = self.experiment.body()? {
            map.extend(body);
        }
        Ok(Value::Object(map))
    }

    /// Makes relative data paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let data = match &mut self.experiment {
            Experiment::RegressionCalibration(c) => &mut c.data,
            Experiment::EncodingAblation(c) => &mut c.data,
            _ => return,
        };
        if let DataSource::Csv { path, .. } = data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Semantic checks beyond the schema, including that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds: at least one seed is required"));
        }
        let check_k = |k: usize| {
            if k == 0 {
                Err(Error::invalid("anchors: must be >= 1"))
            } else {
                Ok(())
            }
        };
        match &self.experiment {
            Experiment::RegressionCalibration(c) => {
                validate_data(&c.data)?;
                c.learner.validate()?;
                check_k(c.anchors)?;
                if matches!(c.learner, LearnerConfig::Ksvm(_)) {
                    return Err(Error::invalid("learner: a kernel SVM is a classifier"));
                }
            }
            Experiment::EncodingAblation(c) => {
                validate_data(&c.data)?;
                c.learner.validate()?;
                check_k(c.anchors)?;
                if c.schemes.is_empty() {
                    return Err(Error::invalid("schemes: at least one scheme is required"));
                }
                if matches!(c.learner, LearnerConfig::Ksvm(_)) {
                    return Err(Error::invalid("learner: a kernel SVM is a classifier"));
                }
            }
            Experiment::Smo(c) => c.smo.validate()?,
            Experiment::Mbo(c) => {
                c.mbo.task.validate()?;
                c.mbo.search.validate()?;
                c.mbo.forward.validate()?;
                c.mbo.inverse.mlp.validate()?;
            }
            Experiment::Ood(c) => {
                validate_moons(&c.moons)?;
                c.learner.validate()?;
                check_k(c.anchors)?;
                if c.schemes.is_empty() {
                    return Err(Error::invalid("schemes: at least one scheme is required"));
                }
                if !(c.box_inflation >= 1.0) || c.n_ood == 0 {
                    return Err(Error::invalid("box_inflation must be >= 1 and n_ood >= 1"));
                }
            }
            Experiment::CalibrationShift(c) => {
                validate_moons(&c.moons)?;
                c.learner.validate()?;
                check_k(c.anchors)?;
                if c.bins == 0 {
                    return Err(Error::invalid("bins: must be >= 1"));
                }
                for &i in &c.intensities {
                    crate::functions::CorruptionSpec {
                        kind: c.corruption,
                        intensity: i,
                        seed: 0,
                    }
                    .validate()?;
                }
            }
            Experiment::AnchorAblation(c) => {
                validate_moons(&c.moons)?;
                c.learner.validate()?;
                if c.k_values.is_empty() {
                    return Err(Error::invalid("k_values: at least one anchor count is required"));
                }
                if let Some(k) = c.k_values.iter().find(|k| **k < 1) {
                    return Err(Error::invalid(format!("k_values: anchor count {k} is below 1")));
                }
                crate::functions::CorruptionSpec {
                    kind: c.corruption,
                    intensity: c.intensity,
                    seed: 0,
                }
                .validate()?;
            }
        }
        Ok(())
    }
}

fn validate_data(data: &DataSource) -> Result<()> {
    match data {
        DataSource::Csv { path, n_train, .. } => {
            if !path.is_file() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                ));
            }
            if *n_train == 0 {
                return Err(Error::invalid("data.n_train: must be >= 1"));
            }
        }
        DataSource::Function {
            function,
            n_train,
            n_test,
        } => {
            function.validate()?;
            if *n_train < 2 || *n_test < 2 {
                return Err(Error::invalid("data: n_train and n_test must be >= 2"));
            }
        }
    }
    Ok(())
}

fn validate_moons(m: &MoonsSpec) -> Result<()> {
    if m.n_train < 4 || m.n_test < 4 {
        return Err(Error::invalid("moons: n_train and n_test must be >= 4"));
    }
    if !(m.noise_sd >= 0.0) {
        return Err(Error::invalid("moons.noise_sd: must be >= 0"));
    }
    Ok(())
}

fn take_field<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str, origin: &Path) -> Result<Option<T>> {
    let Some(v) = map.remove(key) else {
        return Ok(None);
    };
    serde_path_to_error::deserialize(v)
        .map(Some)
        .map_err(|e| Error::Config {
            path: origin.display().to_string(),
            message: format!("{key}{}: {}", suffix(e.path()), e.inner()),
        })
}

fn parse_body<T: DeserializeOwned>(body: Value, origin: &Path) -> Result<T> {
    serde_path_to_error::deserialize(body).map_err(|e| Error::Config {
        path: origin.display().to_string(),
        message: format!("{}: {}", e.path(), e.inner()),
    })
}

/// `seeds` + `[1]`, or nothing for the root.
fn suffix(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    match s.as_str() {
        "." => String::new(),
        _ if s.starts_with('[') => s,
        _ => format!(".{s}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(text, Path::new("cfg.json"))
    }

    #[test]
    fn minimal_documents_parse_with_defaults() {
        for name in Experiment::NAMES {
            let cfg = parse(&format!(r#"{{"experiment": "{name}", "seeds": [0, 1]}}"#)).unwrap();
            assert_eq!(cfg.experiment.name(), name);
            assert_eq!(cfg.seeds, vec![0, 1]);
        }
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse(r#"{"experiment": "smo", "seeds": [3], "smo": {"objective": {"name": "booth"}, "n_iterations": 20}}"#).unwrap();
        let text = serde_json::to_string(&cfg.to_value().unwrap()).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field_path() {
        let err = parse(r#"{"experiment": "smo", "seeds": [0], "smo": {"n_iterations": "many"}}"#).unwrap_err();
        assert!(err.to_string().contains("smo.n_iterations"), "{err}");
        let err = parse(r#"{"experiment": "ood", "seeds": [0, -1]}"#).unwrap_err();
        assert!(err.to_string().contains("seeds[1]"), "{err}");
        let err = parse(r#"{"experiment": "ood", "seeds": [0], "anchorz": 3}"#).unwrap_err();
        assert!(err.to_string().contains("anchorz"), "{err}");
        let err = parse(r#"{"experiment": "nope", "seeds": [0]}"#).unwrap_err();
        assert!(err.to_string().contains("experiment"), "{err}");
        assert!(parse(r#"{"seeds": [0]}"#).is_err());
    }

    #[test]
    fn validation_rejects_missing_files_and_empty_seeds() {
        let cfg = parse(
            r#"{"experiment": "regression-calibration", "seeds": [0],
                "data": {"kind": "csv", "path": "no/such/file.csv", "target": "y", "n_train": 10}}"#,
        )
        .unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("no/such/file.csv"), "{err}");
        let cfg = parse(r#"{"experiment": "smo", "seeds": []}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = parse(r#"{"experiment": "anchor-ablation", "seeds": [0], "k_values": [0, 2]}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
