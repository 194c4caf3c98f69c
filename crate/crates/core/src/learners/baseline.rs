//! Non-anchored reference models: a single learner or a deep ensemble.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::forest::{Forest, ForestConfig};
use super::ksvm::{KernelSvm, KsvmConfig};
use super::mlp::MlpConfig;
use super::model::{fit_network, softmax_rows, TargetScaler, Task, TrainedLearner};
use crate::encoding::PredictionSummary;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Hyperparameters for any supported learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerConfig {
    Mlp(MlpConfig),
    Forest(ForestConfig),
    Ksvm(KsvmConfig),
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::Mlp(MlpConfig::default())
    }
}

impl LearnerConfig {
    pub fn seed(&self) -> u64 {
        match self {
            LearnerConfig::Mlp(c) => c.seed,
            LearnerConfig::Forest(c) => c.seed,
            LearnerConfig::Ksvm(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            LearnerConfig::Mlp(c) => c.seed = seed,
            LearnerConfig::Forest(c) => c.seed = seed,
            LearnerConfig::Ksvm(c) => c.seed = seed,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerConfig::Mlp(c) => c.validate(),
            LearnerConfig::Forest(c) => c.validate(),
            LearnerConfig::Ksvm(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineKind {
    Plain,
    Ensemble { members: usize },
}

/// A learner trained directly on raw inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainModel {
    learner: TrainedLearner,
    input_dim: usize,
    task: Task,
    target_scaler: Option<TargetScaler>,
}

impl PlainModel {
    pub fn task(&self) -> Task {
        self.task
    }

    pub fn learner(&self) -> &TrainedLearner {
        &self.learner
    }

    /// Raw outputs (regression values, logits or decision values), `n × out`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::dims("model input", self.input_dim, x.ncols()));
        }
        let raw = self.learner.predict_rows(x);
        Ok(match &self.target_scaler {
            Some(s) => s.inverse(raw),
            None => raw,
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self.task {
            Task::Classification { .. } => Ok(softmax_rows(self.predict(x)?)),
            Task::Regression { .. } => Err(Error::invalid("probabilities requested from a regression model")),
        }
    }
}

/// Either one model or several, independently seeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "members", rename_all = "kebab-case")]
pub enum BaselineModel {
    Plain(Box<PlainModel>),
    Ensemble(Vec<PlainModel>),
}

impl BaselineModel {
    pub fn members(&self) -> &[PlainModel] {
        match self {
            BaselineModel::Plain(m) => std::slice::from_ref(m.as_ref()),
            BaselineModel::Ensemble(ms) => ms,
        }
    }

    /// Per-row mean and spread across members. A plain model reports zero
    /// variance.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<PredictionSummary>> {
        self.summarize(x, PlainModel::predict)
    }

    /// Like [`predict`](Self::predict) but over class probabilities.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<PredictionSummary>> {
        self.summarize(x, PlainModel::predict_proba)
    }

    fn summarize(
        &self,
        x: ArrayView2<'_, f64>,
        f: impl Fn(&PlainModel, ArrayView2<'_, f64>) -> Result<Array2<f64>>,
    ) -> Result<Vec<PredictionSummary>> {
        let outputs = self.members().iter().map(|m| f(m, x)).collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = outputs.iter().map(|o| o.view()).collect();
        let stacked = ndarray::stack(Axis(1), &views).map_err(|e| Error::invalid(e.to_string()))?;
        stacked
            .outer_iter()
            .map(|rows| PredictionSummary::from_rows(rows.to_owned()))
            .collect()
    }
}

/// Fits one learner on raw inputs.
pub fn train_plain(train: &Dataset, cfg: &LearnerConfig) -> Result<PlainModel> {
    cfg.validate()?;
    let task = Task::of(train);
    let (learner, target_scaler) = match cfg {
        LearnerConfig::Mlp(c) => {
            let x = train.inputs();
            let (network, scaler) = fit_network(train, c, train.dim(), None, |idx, _| x.select(Axis(0), idx))?;
            (
                TrainedLearner::Mlp {
                    network,
                    config: c.clone(),
                },
                scaler,
            )
        }
        LearnerConfig::Forest(c) => {
            let y = train.regression_targets()?;
            let forest = Forest::fit(train.inputs().view(), y.view(), c)?;
            (
                TrainedLearner::Forest {
                    forest,
                    config: c.clone(),
                },
                None,
            )
        }
        LearnerConfig::Ksvm(c) => {
            let (labels, n_classes) = train.labels()?;
            let svm = KernelSvm::fit(train.inputs().view(), labels, n_classes, c)?;
            (
                TrainedLearner::Ksvm {
                    svm,
                    config: c.clone(),
                },
                None,
            )
        }
    };
    Ok(PlainModel {
        learner,
        input_dim: train.dim(),
        task,
        target_scaler,
    })
}

/// Plain model or an `m`-member ensemble with seeds derived from the config seed.
pub fn train_baseline(train: &Dataset, kind: BaselineKind, cfg: &LearnerConfig) -> Result<BaselineModel> {
    match kind {
        BaselineKind::Plain => Ok(BaselineModel::Plain(Box::new(train_plain(train, cfg)?))),
        BaselineKind::Ensemble { members } => {
            if members < 2 {
                return Err(Error::invalid(format!("an ensemble needs at least 2 members, got {members}")));
            }
            let seeds: Vec<u64> = (0..members as u64).map(|i| derive_seed(cfg.seed(), i)).collect();
            train_ensemble_with_seeds(train, cfg, &seeds)
        }
    }
}

/// Ensemble with one member per explicit seed.
pub fn train_ensemble_with_seeds(train: &Dataset, cfg: &LearnerConfig, seeds: &[u64]) -> Result<BaselineModel> {
    if seeds.len() < 2 {
        return Err(Error::invalid(format!("an ensemble needs at least 2 members, got {}", seeds.len())));
    }
    let members = seeds
        .iter()
        .map(|&s| train_plain(train, &cfg.with_seed(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineModel::Ensemble(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn tiny() -> Dataset {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 / 20.0 - 1.0);
        let y = x.column(0).mapv(|v| 2.0 * v + 0.5).to_vec();
        Dataset::regression_1d(x, y).unwrap()
    }

    fn quick() -> LearnerConfig {
        LearnerConfig::Mlp(MlpConfig {
            hidden_layers: vec![16],
            epochs: 30,
            ..Default::default()
        })
    }

    #[test]
    fn ensemble_needs_two_members() {
        let ds = tiny();
        assert!(train_baseline(&ds, BaselineKind::Ensemble { members: 1 }, &quick()).is_err());
        assert!(train_ensemble_with_seeds(&ds, &quick(), &[3]).is_err());
    }

    #[test]
    fn plain_model_has_zero_spread() {
        let ds = tiny();
        let m = train_baseline(&ds, BaselineKind::Plain, &quick()).unwrap();
        let s = m.predict(ds.inputs().view()).unwrap();
        assert!(s.iter().all(|p| p.total_variance == 0.0));
    }

    #[test]
    fn ensemble_members_disagree() {
        let ds = tiny();
        let m = train_baseline(&ds, BaselineKind::Ensemble { members: 3 }, &quick()).unwrap();
        assert_eq!(m.members().len(), 3);
        let s = m.predict(ds.inputs().view()).unwrap();
        assert!(s.iter().any(|p| p.total_variance > 0.0));
    }

    #[test]
    fn wrong_input_width() {
        let ds = tiny();
        let m = train_plain(&ds, &quick()).unwrap();
        assert!(m.predict(Array2::zeros((2, 3)).view()).is_err());
    }
}
