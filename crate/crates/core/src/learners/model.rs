use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Targets};
use super::forest::{Forest, ForestConfig};
use super::ksvm::{KernelSvm, KsvmConfig};
use super::mlp::{fit, BatchTargets, Loss, MlpConfig, Network};
use crate::encoding::{softmax, AnchorPrior, AnchoredPredictor, EncodingScheme};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

/// What a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression { outputs: usize },
    /// Outputs are per-class logits (MLP) or decision values (SVM).
    Classification { classes: usize },
}

impl Task {
    pub(crate) fn of(ds: &Dataset) -> Task {
        match ds.targets() {
            Targets::Regression(t) => Task::Regression { outputs: t.ncols() },
            Targets::Classes { n_classes, .. } => Task::Classification { classes: *n_classes },
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            Task::Regression { outputs } => outputs,
            Task::Classification { classes } => classes,
        }
    }
}

/// Per-column affine map into z-score space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl TargetScaler {
    pub fn fit(targets: &Array2<f64>) -> Self {
        let mean = targets.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(targets.ncols()));
        let scale = targets
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        TargetScaler { mean, scale }
    }

    pub fn transform(&self, t: &Array2<f64>) -> Array2<f64> {
        (t - &self.mean) / &self.scale
    }

    pub fn inverse(&self, mut t: Array2<f64>) -> Array2<f64> {
        t *= &self.scale;
        t += &self.mean;
        t
    }

    pub fn scale(&self) -> &Array1<f64> {
        &self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Mlp,
    Forest,
    Ksvm,
}

/// Fitted parameters of one base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainedLearner {
    Mlp { network: Network, config: MlpConfig },
    Forest { forest: Forest, config: ForestConfig },
    Ksvm { svm: KernelSvm, config: KsvmConfig },
}

impl TrainedLearner {
    pub fn kind(&self) -> LearnerKind {
        match self {
            TrainedLearner::Mlp { .. } => LearnerKind::Mlp,
            TrainedLearner::Forest { .. } => LearnerKind::Forest,
            TrainedLearner::Ksvm { .. } => LearnerKind::Ksvm,
        }
    }

    pub(crate) fn predict_rows(&self, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            TrainedLearner::Mlp { network, .. } => network.forward(rows),
            TrainedLearner::Forest { forest, .. } => forest.predict(rows),
            TrainedLearner::Ksvm { svm, .. } => svm.decision_function(rows),
        }
    }
}

/// A predictor trained on anchored tuples, `f_Δ(R, Δ(X, R))`.
///
/// Only constructed by the `train_anchored_*` functions or by loading a
/// saved model, so every instance is trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaModel {
    pub(crate) learner: TrainedLearner,
    pub(crate) scheme: EncodingScheme,
    pub(crate) input_dim: usize,
    pub(crate) task: Task,
    pub(crate) target_scaler: Option<TargetScaler>,
    pub(crate) training_prior: AnchorPrior,
}

impl DeltaModel {
    pub fn learner(&self) -> &TrainedLearner {
        &self.learner
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn training_prior(&self) -> &AnchorPrior {
        &self.training_prior
    }

    pub fn target_scaler(&self) -> Option<&TargetScaler> {
        self.target_scaler.as_ref()
    }

    /// Softmax view over the class outputs, for probability-space uncertainty.
    pub fn probabilities(&self) -> Result<Probabilities<'_>> {
        match self.task {
            Task::Classification { .. } => Ok(Probabilities(self)),
            Task::Regression { .. } => Err(Error::invalid("probabilities requested from a regression model")),
        }
    }
}

impl AnchoredPredictor for DeltaModel {
    fn scheme(&self) -> EncodingScheme {
        self.scheme
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.task.output_dim()
    }

    fn predict_tuples(&self, tuples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let expected = self.scheme.tuple_dim(self.input_dim);
        if tuples.ncols() != expected {
            return Err(Error::dims(format!("{} tuple", self.scheme), expected, tuples.ncols()));
        }
        let raw = self.learner.predict_rows(tuples);
        Ok(match &self.target_scaler {
            Some(s) => s.inverse(raw),
            None => raw,
        })
    }
}

/// Class probabilities of a [`DeltaModel`] classifier.
#[derive(Debug, Clone, Copy)]
pub struct Probabilities<'a>(&'a DeltaModel);

impl AnchoredPredictor for Probabilities<'_> {
    fn scheme(&self) -> EncodingScheme {
        self.0.scheme
    }
    fn input_dim(&self) -> usize {
        self.0.input_dim
    }
    fn output_dim(&self) -> usize {
        self.0.output_dim()
    }
    fn predict_tuples(&self, tuples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(self.0.predict_tuples(tuples)?))
    }
}

pub(crate) fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let p = softmax(row.as_slice().expect("rows of an owned array are contiguous"));
        row.assign(&Array1::from(p));
    }
    logits
}

/// How the MLP trainer picks anchors inside a mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorPairing {
    /// Sample `j` of a batch of size `B` is anchored on sample `B − 1 − j`.
    /// Only used with a training-distribution prior; the middle row of an
    /// odd batch, single-row batches and full-batch training fall back to
    /// prior draws.
    #[default]
    BatchReversal,
    /// Every anchor is an independent prior draw.
    Prior,
}

pub(crate) fn check_prior(prior: &AnchorPrior, d: usize) -> Result<()> {
    prior.validate()?;
    if prior.dim() != d {
        return Err(Error::dims("anchor prior", d, prior.dim()));
    }
    Ok(())
}

/// Trains a network on rows produced by `rows_for`, returning it with the
/// target scaler used (regression only).
pub(crate) fn fit_network<F>(
    train: &Dataset,
    cfg: &MlpConfig,
    in_dim: usize,
    init: Option<Network>,
    mut rows_for: F,
) -> Result<(Network, Option<TargetScaler>)>
where
    F: FnMut(&[usize], &mut Rng) -> Array2<f64>,
{
    cfg.validate()?;
    let task = Task::of(train);
    let mut sizes = vec![in_dim];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(task.output_dim());
    let mut network = match init {
        Some(net) if net.input_dim() == in_dim && net.output_dim() == task.output_dim() => net,
        Some(_) => return Err(Error::invalid("warm-start network has the wrong shape")),
        None => Network::new(&sizes, cfg.activation, &mut stream(cfg.seed, 0))?,
    };
    let mut rng = stream(cfg.seed, 1);
    match train.targets() {
        Targets::Regression(t) => {
            let scaler = cfg.standardize_targets.then(|| TargetScaler::fit(t));
            let fitted = match &scaler {
                Some(s) => s.transform(t),
                None => t.clone(),
            };
            fit(&mut network, cfg, train.len(), Loss::Mse, &mut rng, |_, idx, rng| {
                (rows_for(idx, rng), BatchTargets::Values(fitted.select(Axis(0), idx)))
            })?;
            Ok((network, scaler))
        }
        Targets::Classes { labels, .. } => {
            fit(&mut network, cfg, train.len(), Loss::CrossEntropy, &mut rng, |_, idx, rng| {
                (rows_for(idx, rng), BatchTargets::Labels(idx.iter().map(|&i| labels[i]).collect()))
            })?;
            Ok((network, None))
        }
    }
}

/// Trains an anchored MLP with one random anchor per sample per step.
pub fn train_anchored_mlp(
    train: &Dataset,
    cfg: &MlpConfig,
    scheme: EncodingScheme,
    prior: AnchorPrior,
) -> Result<DeltaModel> {
    train_anchored_mlp_with(train, cfg, scheme, prior, AnchorPairing::default())
}

pub fn train_anchored_mlp_with(
    train: &Dataset,
    cfg: &MlpConfig,
    scheme: EncodingScheme,
    prior: AnchorPrior,
    pairing: AnchorPairing,
) -> Result<DeltaModel> {
    anchored_mlp(train, cfg, scheme, prior, pairing, None)
}

/// Continues training from `previous`'s weights on a new dataset.
pub fn warm_start_anchored_mlp(
    previous: &DeltaModel,
    train: &Dataset,
    cfg: &MlpConfig,
    prior: AnchorPrior,
) -> Result<DeltaModel> {
    let TrainedLearner::Mlp { network, .. } = &previous.learner else {
        return Err(Error::invalid("warm start needs an MLP model"));
    };
    anchored_mlp(train, cfg, previous.scheme, prior, AnchorPairing::default(), Some(network.clone()))
}

fn anchored_mlp(
    train: &Dataset,
    cfg: &MlpConfig,
    scheme: EncodingScheme,
    prior: AnchorPrior,
    pairing: AnchorPairing,
    init: Option<Network>,
) -> Result<DeltaModel> {
    let d = train.dim();
    check_prior(&prior, d)?;
    let n = train.len();
    let reversal = pairing == AnchorPairing::BatchReversal
        && matches!(prior, AnchorPrior::TrainDistribution { .. })
        && cfg.batch_size < n;
    let x = train.inputs();
    let width = scheme.tuple_dim(d);
    let per = scheme.anchors_per_input();
    let mut anchors = vec![vec![0.0; d]; per];
    let (network, target_scaler) = fit_network(train, cfg, width, init, |idx, rng| {
        let b = idx.len();
        let mut rows = Array2::<f64>::zeros((b, width));
        for (j, mut row) in rows.rows_mut().into_iter().enumerate() {
            let partner = b - 1 - j;
            if reversal && partner != j {
                anchors[0].copy_from_slice(x.row(idx[partner]).as_slice().expect("standard layout"));
            } else {
                prior.sample_into(rng, &mut anchors[0]);
            }
            for a in anchors.iter_mut().skip(1) {
                prior.sample_into(rng, a);
            }
            let refs: Vec<&[f64]> = anchors.iter().map(Vec::as_slice).collect();
            let xi = x.row(idx[j]);
            scheme.write_tuple(xi.as_slice().expect("standard layout"), &refs, row.as_slice_mut().expect("contiguous"));
        }
        rows
    })?;
    Ok(DeltaModel {
        learner: TrainedLearner::Mlp {
            network,
            config: cfg.clone(),
        },
        scheme,
        input_dim: d,
        task: Task::of(train),
        target_scaler,
        training_prior: prior,
    })
}

/// Builds `A · n` anchored rows: every sample paired with `A` distinct anchors.
fn replicate(
    train: &Dataset,
    scheme: EncodingScheme,
    prior: &AnchorPrior,
    copies: usize,
    rng: &mut Rng,
    distinct: bool,
) -> (Array2<f64>, Vec<usize>) {
    let d = train.dim();
    let width = scheme.tuple_dim(d);
    let per = scheme.anchors_per_input();
    let mut rows = Array2::<f64>::zeros((train.len() * copies, width));
    let mut source = Vec::with_capacity(train.len() * copies);
    let mut r = 0;
    for (i, x) in train.inputs().rows().into_iter().enumerate() {
        let x = x.to_vec();
        let groups: Vec<Vec<Vec<f64>>> = (0..per)
            .map(|_| {
                if distinct {
                    prior.sample_distinct(copies, rng)
                } else {
                    (0..copies)
                        .map(|_| {
                            let mut a = vec![0.0; d];
                            prior.sample_into(rng, &mut a);
                            a
                        })
                        .collect()
                }
            })
            .collect();
        for c in 0..copies {
            let refs: Vec<&[f64]> = groups.iter().map(|g| g[c].as_slice()).collect();
            scheme.write_tuple(&x, &refs, rows.row_mut(r).as_slice_mut().expect("contiguous"));
            source.push(i);
            r += 1;
        }
    }
    (rows, source)
}

/// Trains a random forest on `A` anchored copies of every training row.
pub fn train_anchored_forest(
    train: &Dataset,
    cfg: &ForestConfig,
    scheme: EncodingScheme,
    prior: AnchorPrior,
) -> Result<DeltaModel> {
    cfg.validate()?;
    let targets = train.regression_targets()?;
    if train.len() < 2 {
        return Err(Error::invalid("an anchored forest needs at least 2 training rows"));
    }
    check_prior(&prior, train.dim())?;
    let mut rng = stream(cfg.seed, 1);
    let (rows, source) = replicate(train, scheme, &prior, cfg.anchor_replication, &mut rng, true);
    let y = targets.select(Axis(0), &source);
    let forest = Forest::fit(rows.view(), y.view(), cfg)?;
    Ok(DeltaModel {
        learner: TrainedLearner::Forest {
            forest,
            config: cfg.clone(),
        },
        scheme,
        input_dim: train.dim(),
        task: Task::of(train),
        target_scaler: None,
        training_prior: prior,
    })
}

/// Trains a one-vs-rest kernel SVM; each of the `A` passes pairs every
/// sample with one fresh anchor.
pub fn train_anchored_ksvm(
    train: &Dataset,
    cfg: &KsvmConfig,
    scheme: EncodingScheme,
    prior: AnchorPrior,
) -> Result<DeltaModel> {
    cfg.validate()?;
    let (labels, n_classes) = train.labels()?;
    check_prior(&prior, train.dim())?;
    let mut rng = stream(cfg.seed, 1);
    let d = train.dim();
    let width = scheme.tuple_dim(d);
    let per = scheme.anchors_per_input();
    let n = train.len();
    let mut rows = Array2::<f64>::zeros((n * cfg.anchor_passes, width));
    let mut row_labels = Vec::with_capacity(n * cfg.anchor_passes);
    let mut anchors = vec![vec![0.0; d]; per];
    for pass in 0..cfg.anchor_passes {
        for (i, x) in train.inputs().rows().into_iter().enumerate() {
            for a in anchors.iter_mut() {
                prior.sample_into(&mut rng, a);
            }
            let refs: Vec<&[f64]> = anchors.iter().map(Vec::as_slice).collect();
            scheme.write_tuple(
                x.as_slice().expect("standard layout"),
                &refs,
                rows.row_mut(pass * n + i).as_slice_mut().expect("contiguous"),
            );
            row_labels.push(labels[i]);
        }
    }
    let svm = KernelSvm::fit(rows.view(), &row_labels, n_classes, cfg)?;
    Ok(DeltaModel {
        learner: TrainedLearner::Ksvm {
            svm,
            config: cfg.clone(),
        },
        scheme,
        input_dim: d,
        task: Task::of(train),
        target_scaler: None,
        training_prior: prior,
    })
}
