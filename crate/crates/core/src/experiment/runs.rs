//! Per-seed bodies of each experiment.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use super::config::{
    AnchorAblation, CalibrationShift, DataSource, EncodingAblation, MboExperiment, MoonsSpec, OodExperiment,
    RegressionCalibration, SmoExperiment,
};
use super::report::Artifact;
use crate::encoding::{
    marginalized_predict_batch, predictive_entropy, softmax, AnchorPrior, EncodingScheme, LogitScaling,
    PredictionSummary,
};
use crate::error::{Error, Result};
use crate::functions::{corrupt, load_csv, make_two_moons, split, CorruptionSpec, Table};
use crate::learners::{
    train_anchored, train_anchored_mlp, train_baseline, train_plain, Dataset, LearnerConfig, MlpConfig,
};
use crate::mbo::run_mbo;
use crate::metrics::{auroc, ece, mae, r2, spearman};
use crate::rng::{derive_seed, stream};
use crate::smo::run_smo;

/// What one seed contributes to a report.
#[derive(Debug, Default)]
pub struct SeedOutcome {
    pub metrics: BTreeMap<String, f64>,
    pub metric_errors: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
}

impl SeedOutcome {
    fn record(&mut self, name: impl Into<String>, value: Result<f64>) {
        let name = name.into();
        match value {
            Ok(v) => {
                self.metrics.insert(name, v);
            }
            Err(e) => {
                self.metric_errors.insert(name, e.to_string());
            }
        }
    }
}

fn regression_split(data: &DataSource, seed: u64) -> Result<(Dataset, Dataset)> {
    match data {
        DataSource::Csv { path, target, n_train } => {
            let ds = load_csv(path, target.clone())?;
            split(&ds, *n_train, seed)
        }
        DataSource::Function {
            function,
            n_train,
            n_test,
        } => Ok((
            function.dataset(*n_train, &mut stream(seed, 0))?,
            function.dataset(*n_test, &mut stream(seed, 1))?,
        )),
    }
}

/// Predicted means (first output), spreads and absolute errors on `test`.
struct RegressionScores {
    truth: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    abs_err: Vec<f64>,
}

impl RegressionScores {
    fn new(test: &Dataset, summaries: &[PredictionSummary]) -> Result<Self> {
        let truth = test.regression_targets()?.column(0).to_vec();
        let mu: Vec<f64> = summaries.iter().map(|s| s.mean[0]).collect();
        let sigma = summaries.iter().map(PredictionSummary::std_dev).collect();
        let abs_err = mu.iter().zip(&truth).map(|(m, t)| (m - t).abs()).collect();
        Ok(RegressionScores {
            truth,
            mu,
            sigma,
            abs_err,
        })
    }

    fn record(&self, out: &mut SeedOutcome, prefix: &str) {
        out.record(format!("{prefix}r2"), r2(&self.mu, &self.truth));
        out.record(format!("{prefix}mae"), mae(&self.mu, &self.truth));
        out.record(format!("{prefix}spearman"), spearman(&self.sigma, &self.abs_err));
    }
}

fn feature_columns(ds: &Dataset) -> Vec<String> {
    match ds.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..ds.dim()).map(|j| format!("x{j}")).collect(),
    }
}

pub(crate) fn regression_calibration(c: &RegressionCalibration, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = regression_split(&c.data, seed)?;
    let prior = c.prior.build(train.inputs())?;
    let learner = c.learner.with_seed(derive_seed(seed, 2));
    let model = train_anchored(&train, &learner, c.scheme, prior.clone())?;
    let summaries = marginalized_predict_batch(&model, test.inputs().view(), &prior, c.anchors, &mut stream(seed, 3))?;
    let scores = RegressionScores::new(&test, &summaries)?;
    let mut out = SeedOutcome::default();
    scores.record(&mut out, "");

    let mut columns = feature_columns(&test);
    columns.extend(["y", "mu", "sigma"].map(String::from));
    let mut table = Table::new(columns);
    for (i, x) in test.inputs().rows().into_iter().enumerate() {
        let mut row = x.to_vec();
        row.extend([scores.truth[i], scores.mu[i], scores.sigma[i]]);
        table.push(row)?;
    }
    out.artifacts.push(Artifact::csv(format!("predictions_seed{seed}.csv"), table));

    if let Some(kind) = c.baseline {
        let baseline = train_baseline(&train, kind, &learner)?;
        let summaries = baseline.predict(test.inputs().view())?;
        RegressionScores::new(&test, &summaries)?.record(&mut out, "baseline.");
    }
    Ok(out)
}

pub(crate) fn encoding_ablation(c: &EncodingAblation, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = regression_split(&c.data, seed)?;
    let prior = c.prior.build(train.inputs())?;
    let learner = c.learner.with_seed(derive_seed(seed, 2));
    let mut out = SeedOutcome::default();
    let mut table = Table::new(["scheme", "r2", "mae", "spearman"].map(String::from).to_vec());
    for (i, &scheme) in c.schemes.iter().enumerate() {
        let model = train_anchored(&train, &learner, scheme, prior.clone())?;
        let summaries =
            marginalized_predict_batch(&model, test.inputs().view(), &prior, c.anchors, &mut stream(seed, 3))?;
        let prefix = format!("{}.", scheme.name());
        RegressionScores::new(&test, &summaries)?.record(&mut out, &prefix);
        let get = |m: &str| out.metrics.get(&format!("{prefix}{m}")).copied().unwrap_or(f64::NAN);
        table.push(vec![i as f64, get("r2"), get("mae"), get("spearman")])?;
    }
    out.artifacts.push(Artifact::csv(format!("ablation_seed{seed}.csv"), table));
    Ok(out)
}

pub(crate) fn smo(c: &SmoExperiment, seed: u64) -> Result<SeedOutcome> {
    let cfg = crate::smo::SmoConfig { seed, ..c.smo.clone() };
    let trace = run_smo(&cfg)?;
    let mut out = SeedOutcome::default();
    out.metrics.insert("initial_best".into(), trace.initial_best());
    out.metrics.insert("best".into(), trace.best());
    out.artifacts.push(Artifact::csv(format!("smo_trace_seed{seed}.csv"), trace.to_table()));
    Ok(out)
}

pub(crate) fn mbo(c: &MboExperiment, seed: u64) -> Result<SeedOutcome> {
    let cfg = crate::mbo::MboConfig { seed, ..c.mbo.clone() };
    let result = run_mbo(&cfg)?;
    let mut out = SeedOutcome::default();
    out.metrics.insert("forward_train_r2".into(), result.forward_train_r2);
    for t in &result.targets {
        let key = format!("target_{}", t.fraction);
        out.metrics.insert(format!("{key}.weighted_abs_error"), t.weighted.abs_error);
        out.metrics.insert(format!("{key}.vanilla_abs_error"), t.vanilla.abs_error);
        out.metrics.insert(format!("{key}.weighted_achieved"), t.weighted.achieved);
        out.metrics.insert(format!("{key}.vanilla_achieved"), t.vanilla.achieved);
    }
    out.artifacts.push(Artifact::json(format!("mbo_result_seed{seed}.json"), serde_json::to_value(&result)?));
    Ok(out)
}

fn moons(spec: &MoonsSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    Ok((
        make_two_moons(spec.n_train, spec.noise_sd, derive_seed(seed, 0))?,
        make_two_moons(spec.n_test, spec.noise_sd, derive_seed(seed, 1))?,
    ))
}

fn train_classifier(
    train: &Dataset,
    learner: &MlpConfig,
    scheme: EncodingScheme,
    seed: u64,
) -> Result<(crate::learners::DeltaModel, AnchorPrior)> {
    let prior = AnchorPrior::train_distribution(train.inputs())?;
    let cfg = MlpConfig {
        seed: derive_seed(seed, 2),
        ..learner.clone()
    };
    Ok((train_anchored_mlp(train, &cfg, scheme, prior.clone())?, prior))
}

/// Softmax of uncertainty-scaled mean logits, one row per input.
pub(crate) fn scaled_probabilities(summaries: &[PredictionSummary], scaling: &LogitScaling) -> Result<Array2<f64>> {
    let k = summaries.first().map_or(0, |s| s.mean.len());
    let mut probs = Array2::zeros((summaries.len(), k));
    for (i, s) in summaries.iter().enumerate() {
        let logits = scaling.apply(s.mean.as_slice().expect("contiguous"), s.variance.as_slice().expect("contiguous"))?;
        probs.row_mut(i).assign(&ndarray::Array1::from(softmax(&logits)));
    }
    Ok(probs)
}

fn entropies(probs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    probs
        .rows()
        .into_iter()
        .map(|p| predictive_entropy(p.as_slice().expect("contiguous")))
        .collect()
}

/// Uniform points over the bounding box of `x`, inflated about its centre.
fn inflated_box_samples(x: &Array2<f64>, inflation: f64, n: usize, seed: u64) -> Array2<f64> {
    let d = x.ncols();
    let mut rng = stream(seed, 5);
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0 * inflation);
            (c - h, c + h)
        })
        .collect();
    Array2::from_shape_fn((n, d), |(_, j)| rng.gen_range(bounds[j].0..=bounds[j].1))
}

pub(crate) fn ood(c: &OodExperiment, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = moons(&c.moons, seed)?;
    let outliers = inflated_box_samples(train.inputs(), c.box_inflation, c.n_ood, seed);
    let (labels, _) = test.labels()?;
    let mut out = SeedOutcome::default();
    let mut columns = vec!["is_ood".to_string()];
    let mut score_columns = Vec::new();
    for &scheme in &c.schemes {
        let (model, prior) = train_classifier(&train, &c.learner, scheme, seed)?;
        let mut rng = stream(seed, 3);
        let inside = marginalized_predict_batch(&model, test.inputs().view(), &prior, c.anchors, &mut rng)?;
        let outside = marginalized_predict_batch(&model, outliers.view(), &prior, c.anchors, &mut rng)?;
        let p_in = scaled_probabilities(&inside, &c.scaling)?;
        let p_out = scaled_probabilities(&outside, &c.scaling)?;
        let (s_in, s_out) = (entropies(p_in.view())?, entropies(p_out.view())?);
        let name = scheme.name();
        out.record(format!("{name}.auroc"), auroc(&s_in, &s_out));
        out.record(format!("{name}.accuracy"), ece(p_in.view(), labels, 1).map(|r| r.accuracy));
        columns.push(format!("entropy_{}", name.replace('-', "_")));
        score_columns.push(s_in.into_iter().chain(s_out).collect::<Vec<_>>());
    }
    let mut table = Table::new(columns);
    for i in 0..test.len() + outliers.nrows() {
        let mut row = vec![if i < test.len() { 0.0 } else { 1.0 }];
        row.extend(score_columns.iter().map(|s| s[i]));
        table.push(row)?;
    }
    out.artifacts.push(Artifact::csv(format!("ood_scores_seed{seed}.csv"), table));
    Ok(out)
}

pub(crate) fn calibration_shift(c: &CalibrationShift, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = moons(&c.moons, seed)?;
    let (model, prior) = train_classifier(&train, &c.learner, c.scheme, seed)?;
    let plain_cfg = LearnerConfig::Mlp(MlpConfig {
        seed: derive_seed(seed, 2),
        ..c.learner.clone()
    });
    let plain = train_plain(&train, &plain_cfg)?;
    let mut out = SeedOutcome::default();
    let mut summary = Table::new(
        ["intensity", "ece_delta", "ece_plain", "accuracy_delta", "accuracy_plain"]
            .map(String::from)
            .to_vec(),
    );
    let mut bins = Table::new(
        ["intensity", "model", "lower", "upper", "count", "confidence", "accuracy"]
            .map(String::from)
            .to_vec(),
    );
    let levels: Vec<u8> = std::iter::once(0).chain(c.intensities.iter().copied()).collect();
    for &level in &levels {
        let shifted = if level == 0 {
            test.clone()
        } else {
            corrupt(
                &test,
                &CorruptionSpec {
                    kind: c.corruption,
                    intensity: level,
                    seed: derive_seed(seed, 3),
                },
            )?
        };
        let (labels, _) = shifted.labels()?;
        let summaries =
            marginalized_predict_batch(&model, shifted.inputs().view(), &prior, c.anchors, &mut stream(seed, 4))?;
        let p_delta = scaled_probabilities(&summaries, &c.scaling)?;
        let p_plain = plain.predict_proba(shifted.inputs().view())?;
        let r_delta = ece(p_delta.view(), labels, c.bins)?;
        let r_plain = ece(p_plain.view(), labels, c.bins)?;
        let key = format!("intensity_{level}");
        out.metrics.insert(format!("{key}.ece_delta"), r_delta.ece);
        out.metrics.insert(format!("{key}.ece_plain"), r_plain.ece);
        out.metrics.insert(format!("{key}.nll_delta"), r_delta.nll);
        out.metrics.insert(format!("{key}.nll_plain"), r_plain.nll);
        out.metrics.insert(format!("{key}.accuracy_delta"), r_delta.accuracy);
        out.metrics.insert(format!("{key}.accuracy_plain"), r_plain.accuracy);
        let l = f64::from(level);
        summary.push(vec![l, r_delta.ece, r_plain.ece, r_delta.accuracy, r_plain.accuracy])?;
        for (m, report) in [(0.0, &r_delta), (1.0, &r_plain)] {
            for b in &report.bins {
                bins.push(vec![l, m, b.lower, b.upper, b.count as f64, b.confidence, b.accuracy])?;
            }
        }
    }
    out.artifacts.push(Artifact::csv(format!("calibration_seed{seed}.csv"), summary));
    out.artifacts.push(Artifact::csv(format!("reliability_seed{seed}.csv"), bins));
    Ok(out)
}

/// `k_values` without repeats, first occurrence kept.
pub(crate) fn dedup_k(k_values: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut seen = Vec::with_capacity(k_values.len());
    let mut dropped = Vec::new();
    for &k in k_values {
        if seen.contains(&k) {
            dropped.push(k);
        } else {
            seen.push(k);
        }
    }
    (seen, dropped)
}

pub(crate) fn anchor_ablation(c: &AnchorAblation, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = moons(&c.moons, seed)?;
    let shifted = corrupt(
        &test,
        &CorruptionSpec {
            kind: c.corruption,
            intensity: c.intensity,
            seed: derive_seed(seed, 3),
        },
    )?;
    let (model, prior) = train_classifier(&train, &c.learner, c.scheme, seed)?;
    let (labels, _) = shifted.labels()?;
    let mut out = SeedOutcome::default();
    let mut table = Table::new(["k", "spearman"].map(String::from).to_vec());
    for k in dedup_k(&c.k_values).0 {
        if k == 0 {
            return Err(Error::invalid("anchor count 0 in sweep"));
        }
        let summaries = marginalized_predict_batch(
            &model.probabilities()?,
            shifted.inputs().view(),
            &prior,
            k,
            &mut stream(seed, 4),
        )?;
        let uncertainty: Vec<f64> = summaries.iter().map(|s| s.total_variance).collect();
        let error: Vec<f64> = summaries.iter().zip(labels).map(|(s, &y)| 1.0 - s.mean[y]).collect();
        let rho = spearman(&uncertainty, &error);
        if let Ok(r) = rho {
            table.push(vec![k as f64, r])?;
        }
        out.record(format!("k_{k}.spearman"), rho);
    }
    out.artifacts.push(Artifact::csv(format!("anchor_ablation_seed{seed}.csv"), table));
    Ok(out)
}
