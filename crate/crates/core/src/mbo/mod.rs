//! Model-based inversion: search an inverse model's latent space for
//! inputs a forward model maps to a requested target.
//!
//! The default objective treats the forward model's anchor-marginalized
//! mean and spread as the location and scale of a Laplace likelihood,
//! `|μ − y*|·e^(−v) + v` with `v = ln b`, so confident predictions near the
//! target win over lucky extrapolations.

mod inverse;

use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use inverse::{train_inverse, InverseConfig, InverseModel};

use crate::encoding::{marginalized_predict, AnchorPrior, AnchoredPredictor};
use crate::error::{Error, Result};
use crate::learners::{train_anchored_mlp, Dataset, DeltaModel, MlpConfig, TrainedLearner};
use crate::rng::{derive_seed, stream, Rng};

/// Floor on the predicted scale `b`.
pub const SCALE_FLOOR: f64 = 1e-6;
/// Central-difference step for forward models without analytic gradients.
pub const FD_STEP: f64 = 1e-3;

/// `|μ − y*|·exp(−ln b) + ln b` with `b` floored at [`SCALE_FLOOR`].
pub fn laplace_objective(mu: f64, scale: f64, target: f64) -> f64 {
    let b = scale.max(SCALE_FLOOR);
    let v = b.ln();
    (mu - target).abs() * (-v).exp() + v
}

/// Synthetic design task: `y = Σ sigmoid(sharpness·x_i)` on `[−1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MboTask {
    pub input_dim: usize,
    pub sharpness: f64,
    /// Training targets never exceed `cap_fraction · input_dim`.
    pub cap_fraction: f64,
    pub n_train: usize,
}

impl Default for MboTask {
    fn default() -> Self {
        MboTask {
            input_dim: 16,
            sharpness: 4.0,
            cap_fraction: 0.6,
            n_train: 5000,
        }
    }
}

impl MboTask {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_train < 2 {
            return Err(Error::invalid("MBO task needs input_dim >= 1 and n_train >= 2"));
        }
        if !(self.sharpness > 0.0) || !(self.cap_fraction > 0.0 && self.cap_fraction < 1.0) {
            return Err(Error::invalid("MBO task needs sharpness > 0 and cap_fraction in (0, 1)"));
        }
        Ok(())
    }

    pub fn cap(&self) -> f64 {
        self.cap_fraction * self.input_dim as f64
    }

    /// The target `fraction · d`.
    pub fn target(&self, fraction: f64) -> f64 {
        fraction * self.input_dim as f64
    }

    pub fn ground_truth(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| 1.0 / (1.0 + (-self.sharpness * v).exp())).sum()
    }

    /// `n_train` uniform samples, rejecting any whose target exceeds the cap.
    pub fn training_set(&self, seed: u64) -> Result<Dataset> {
        self.validate()?;
        let mut rng = stream(seed, 0x4D);
        let d = self.input_dim;
        let mut x = Array2::zeros((self.n_train, d));
        let mut y = Vec::with_capacity(self.n_train);
        let mut row = vec![0.0; d];
        let mut attempts = 0usize;
        while y.len() < self.n_train {
            attempts += 1;
            if attempts > 1000 * self.n_train {
                return Err(Error::invalid("cap rejects nearly every sample"));
            }
            row.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..=1.0));
            let t = self.ground_truth(&row);
            if t <= self.cap() {
                x.row_mut(y.len()).assign(&ndarray::ArrayView1::from(&row));
                y.push(t);
            }
        }
        Dataset::regression_1d(x, y)
    }
}

/// `mbo_objective` at a single latent point, drawing `k` anchors from `rng`.
pub fn mbo_objective(
    forward: &DeltaModel,
    inverse: &InverseModel,
    target: f64,
    z: &[f64],
    prior: &AnchorPrior,
    k: usize,
    rng: &mut Rng,
) -> Result<f64> {
    check_models(forward, inverse)?;
    let x = inverse.generate(target, z)?;
    let summary = marginalized_predict(forward, &x, prior, k, rng)?;
    Ok(laplace_objective(summary.mean[0], summary.std_dev(), target))
}

fn check_models(forward: &DeltaModel, inverse: &InverseModel) -> Result<()> {
    if forward.output_dim() != 1 {
        return Err(Error::dims("forward model outputs", 1, forward.output_dim()));
    }
    if forward.input_dim() != inverse.output_dim() {
        return Err(Error::dims("inverse model outputs", forward.input_dim(), inverse.output_dim()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchObjective {
    /// The Laplace objective using the predicted scale.
    UncertaintyWeighted,
    /// `|μ − y*|` alone.
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentSearchConfig {
    pub restarts: usize,
    pub iterations: usize,
    /// Adam step size on `z`.
    pub step: f64,
    /// Anchors per evaluation; fixed per restart for the whole search.
    pub anchors: usize,
    pub seed: u64,
}

impl Default for LatentSearchConfig {
    fn default() -> Self {
        LatentSearchConfig {
            restarts: 50,
            iterations: 1000,
            step: 0.02,
            anchors: 10,
            seed: 0,
        }
    }
}

impl LatentSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("latent search needs at least one restart"));
        }
        if self.anchors == 0 {
            return Err(Error::invalid("latent search needs at least one anchor"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("latent step must be > 0"));
        }
        Ok(())
    }
}

/// The winning restart of one search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSolution {
    pub objective_kind: SearchObjective,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub mu: f64,
    pub scale: f64,
    pub objective: f64,
    /// Objective of the winning restart after each iteration.
    pub trace: Vec<f64>,
    pub failed_restarts: usize,
}

/// Evaluates all restarts at once with per-restart fixed anchors.
struct Evaluator<'a> {
    forward: &'a DeltaModel,
    inverse: &'a InverseModel,
    target: f64,
    k: usize,
    /// `[restart][anchor] → flattened anchor group`.
    anchors: Vec<Vec<Vec<Vec<f64>>>>,
}

struct Evaluation {
    mu: Vec<f64>,
    scale: Vec<f64>,
    objective: Vec<f64>,
    /// `∂objective/∂f_k` per tuple row, in output units.
    row_grad: Vec<f64>,
    tuples: Array2<f64>,
    g_inputs: Array2<f64>,
}

impl Evaluator<'_> {
    fn evaluate(&self, zs: ArrayView2<'_, f64>, kind: SearchObjective, restarts: &[usize]) -> Result<Evaluation> {
        let g_inputs = self.inverse.inputs(self.target, zs)?;
        let xs = self.inverse.network().forward(g_inputs.view());
        let scheme = self.forward.scheme();
        let d = self.forward.input_dim();
        let width = scheme.tuple_dim(d);
        let n = zs.nrows();
        let mut tuples = Array2::zeros((n * self.k, width));
        for (i, x) in xs.rows().into_iter().enumerate() {
            let x = x.to_vec();
            for (a, group) in self.anchors[restarts[i]].iter().enumerate() {
                let refs: Vec<&[f64]> = group.iter().map(Vec::as_slice).collect();
                scheme.write_tuple(&x, &refs, tuples.row_mut(i * self.k + a).as_slice_mut().expect("contiguous"));
            }
        }
        let preds = self.forward.predict_tuples(tuples.view())?;
        let mut out = Evaluation {
            mu: Vec::with_capacity(n),
            scale: Vec::with_capacity(n),
            objective: Vec::with_capacity(n),
            row_grad: vec![0.0; n * self.k],
            tuples,
            g_inputs,
        };
        let kf = self.k as f64;
        for i in 0..n {
            let f = preds.slice(s![i * self.k..(i + 1) * self.k, 0]);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for (j, v) in f.iter().enumerate() {
                let delta = v - mean;
                mean += delta / (j + 1) as f64;
                m2 += delta * (v - mean);
            }
            let sd = (m2 / kf).max(0.0).sqrt();
            let b = sd.max(SCALE_FLOOR);
            let gap = mean - self.target;
            let sign = gap.signum();
            let (obj, d_mu, d_b) = match kind {
                SearchObjective::UncertaintyWeighted => {
                    let d_b = if sd > SCALE_FLOOR { 1.0 / b - gap.abs() / (b * b) } else { 0.0 };
                    (laplace_objective(mean, sd, self.target), sign / b, d_b)
                }
                SearchObjective::Vanilla => (gap.abs(), sign, 0.0),
            };
            for (j, v) in f.iter().enumerate() {
                out.row_grad[i * self.k + j] = d_mu / kf + d_b * (v - mean) / (kf * b);
            }
            out.mu.push(mean);
            out.scale.push(sd);
            out.objective.push(obj);
        }
        Ok(out)
    }

    /// Gradient of each restart's objective with respect to its latent row.
    fn gradient(&self, zs: ArrayView2<'_, f64>, kind: SearchObjective, restarts: &[usize], e: &Evaluation) -> Result<Array2<f64>> {
        let d = self.forward.input_dim();
        let n = zs.nrows();
        let latent = self.inverse.latent_dim();
        let dx = match self.forward.learner() {
            TrainedLearner::Mlp { network, .. } => {
                let out_scale = self.forward.target_scaler().map_or(1.0, |s| s.scale()[0]);
                let upstream = Array2::from_shape_fn((n * self.k, 1), |(r, _)| e.row_grad[r] * out_scale);
                let g_tuple = network.input_gradient(e.tuples.view(), upstream);
                let width = g_tuple.ncols();
                let mut dx = Array2::zeros((n, d));
                for i in 0..n {
                    for a in 0..self.k {
                        let row = g_tuple.row(i * self.k + a);
                        let mut acc = dx.row_mut(i);
                        acc += &row.slice(s![width - d..]);
                    }
                }
                dx
            }
            _ => return self.finite_difference(zs, kind, restarts),
        };
        let g_grad = self.inverse.network().input_gradient(e.g_inputs.view(), dx);
        Ok(g_grad.slice(s![.., 1..1 + latent]).to_owned())
    }

    fn finite_difference(&self, zs: ArrayView2<'_, f64>, kind: SearchObjective, restarts: &[usize]) -> Result<Array2<f64>> {
        let (n, latent) = zs.dim();
        let mut probes = Array2::zeros((n * 2 * latent, latent));
        let mut owners = Vec::with_capacity(n * 2 * latent);
        let mut steps = Vec::with_capacity(n * latent);
        for i in 0..n {
            for j in 0..latent {
                let hi = (zs[[i, j]] + FD_STEP).min(1.0);
                let lo = (zs[[i, j]] - FD_STEP).max(-1.0);
                for (p, v) in [hi, lo].into_iter().enumerate() {
                    let r = (i * latent + j) * 2 + p;
                    probes.row_mut(r).assign(&zs.row(i));
                    probes[[r, j]] = v;
                    owners.push(restarts[i]);
                }
                steps.push(hi - lo);
            }
        }
        let e = self.evaluate(probes.view(), kind, &owners)?;
        Ok(Array2::from_shape_fn((n, latent), |(i, j)| {
            let r = (i * latent + j) * 2;
            let h = steps[i * latent + j];
            if h > 0.0 {
                (e.objective[r] - e.objective[r + 1]) / h
            } else {
                0.0
            }
        }))
    }
}

/// Projected-Adam search over `z ∈ [−1, 1]^latent` from `restarts` random
/// starts; returns the restart with the lowest final objective.
pub fn optimize_latent(
    forward: &DeltaModel,
    inverse: &InverseModel,
    target: f64,
    prior: &AnchorPrior,
    cfg: &LatentSearchConfig,
    kind: SearchObjective,
) -> Result<LatentSolution> {
    cfg.validate()?;
    check_models(forward, inverse)?;
    if prior.dim() != forward.input_dim() {
        return Err(Error::dims("anchor prior", forward.input_dim(), prior.dim()));
    }
    let latent = inverse.latent_dim();
    let per = forward.scheme().anchors_per_input();
    let mut z = Array2::zeros((cfg.restarts, latent));
    let mut anchors = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = stream(derive_seed(cfg.seed, r as u64), 0);
        z.row_mut(r).iter_mut().for_each(|v| *v = rng.gen_range(-1.0..=1.0));
        let draws = crate::encoding::sample_anchors(prior, cfg.anchors * per, &mut rng)?;
        anchors.push(draws.chunks(per).map(<[Vec<f64>]>::to_vec).collect());
    }
    let eval = Evaluator {
        forward,
        inverse,
        target,
        k: cfg.anchors,
        anchors,
    };
    let mut alive: Vec<usize> = (0..cfg.restarts).collect();
    let mut traces = vec![Vec::with_capacity(cfg.iterations); cfg.restarts];
    let mut m = Array2::<f64>::zeros((cfg.restarts, latent));
    let mut v = Array2::<f64>::zeros((cfg.restarts, latent));
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    for it in 0..cfg.iterations {
        let zs = z.select(ndarray::Axis(0), &alive);
        let e = eval.evaluate(zs.view(), kind, &alive)?;
        let grad = eval.gradient(zs.view(), kind, &alive, &e)?;
        let mut keep = Vec::with_capacity(alive.len());
        for (i, &r) in alive.iter().enumerate() {
            let gi = grad.row(i);
            if !e.objective[i].is_finite() || gi.iter().any(|g| !g.is_finite()) {
                log::warn!("latent restart {r} diverged at iteration {it}");
                continue;
            }
            traces[r].push(e.objective[i]);
            let (c1, c2) = (1.0 - b1.powi(it as i32 + 1), 1.0 - b2.powi(it as i32 + 1));
            for j in 0..latent {
                m[[r, j]] = b1 * m[[r, j]] + (1.0 - b1) * gi[j];
                v[[r, j]] = b2 * v[[r, j]] + (1.0 - b2) * gi[j] * gi[j];
                let update = cfg.step * (m[[r, j]] / c1) / ((v[[r, j]] / c2).sqrt() + eps);
                z[[r, j]] = (z[[r, j]] - update).clamp(-1.0, 1.0);
            }
            keep.push(r);
        }
        alive = keep;
        if alive.is_empty() {
            break;
        }
    }
    if alive.is_empty() {
        return Err(Error::invalid(format!("all {} latent restarts diverged", cfg.restarts)));
    }
    let zs = z.select(ndarray::Axis(0), &alive);
    let e = eval.evaluate(zs.view(), kind, &alive)?;
    let (best, &objective) = e
        .objective
        .iter()
        .enumerate()
        .filter(|(_, o)| o.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::invalid("every latent restart ended with a non-finite objective"))?;
    let r = alive[best];
    let zr = z.row(r).to_vec();
    let x = inverse.generate(target, &zr)?;
    let mut trace = std::mem::take(&mut traces[r]);
    trace.push(objective);
    Ok(LatentSolution {
        objective_kind: kind,
        z: zr,
        x,
        mu: e.mu[best],
        scale: e.scale[best],
        objective,
        trace,
        failed_restarts: cfg.restarts - alive.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOutcome {
    pub solution: LatentSolution,
    /// Ground-truth value of the synthesized input.
    pub achieved: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MboTargetResult {
    pub target: f64,
    pub fraction: f64,
    pub weighted: DesignOutcome,
    pub vanilla: DesignOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MboResult {
    pub task: MboTask,
    pub seed: u64,
    pub forward_train_r2: f64,
    pub targets: Vec<MboTargetResult>,
}

impl MboResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MboConfig {
    pub task: MboTask,
    pub forward: MlpConfig,
    pub inverse: InverseConfig,
    pub search: LatentSearchConfig,
    /// Targets as fractions of `input_dim`.
    pub target_fractions: Vec<f64>,
    pub seed: u64,
}

impl Default for MboConfig {
    fn default() -> Self {
        MboConfig {
            task: MboTask::default(),
            forward: MlpConfig {
                hidden_layers: vec![64, 64],
                epochs: 200,
                ..MlpConfig::default()
            },
            inverse: InverseConfig::default(),
            search: LatentSearchConfig::default(),
            target_fractions: vec![0.4, 0.7, 0.8],
            seed: 0,
        }
    }
}

/// Trains both models for `cfg.seed`, then designs an input for every
/// target with and without the uncertainty weighting.
pub fn run_mbo(cfg: &MboConfig) -> Result<MboResult> {
    cfg.task.validate()?;
    cfg.search.validate()?;
    if cfg.target_fractions.is_empty() {
        return Err(Error::Empty("MBO target list".into()));
    }
    let data = cfg.task.training_set(cfg.seed)?;
    let prior = AnchorPrior::train_distribution(data.inputs())?;
    let forward_cfg = MlpConfig {
        seed: derive_seed(cfg.seed, 1),
        ..cfg.forward.clone()
    };
    let forward = train_anchored_mlp(&data, &forward_cfg, crate::encoding::EncodingScheme::SingleAnchor, prior.clone())?;
    let mut inverse_cfg = cfg.inverse.clone();
    inverse_cfg.mlp.seed = derive_seed(cfg.seed, 2);
    let inverse = train_inverse(&data, &inverse_cfg)?;
    let forward_train_r2 = {
        let mut rng = stream(cfg.seed, 3);
        let preds = crate::encoding::marginalized_predict_batch(&forward, data.inputs().view(), &prior, 5, &mut rng)?;
        let mu: Vec<f64> = preds.iter().map(|p| p.mean[0]).collect();
        let y = data.regression_targets()?.column(0).to_vec();
        crate::metrics::r2(&mu, &y)?
    };
    let search = LatentSearchConfig {
        seed: derive_seed(cfg.seed, 4),
        ..cfg.search.clone()
    };
    let mut targets = Vec::with_capacity(cfg.target_fractions.len());
    for &fraction in &cfg.target_fractions {
        let target = cfg.task.target(fraction);
        let outcome = |kind| -> Result<DesignOutcome> {
            let solution = optimize_latent(&forward, &inverse, target, &prior, &search, kind)?;
            let achieved = cfg.task.ground_truth(&solution.x);
            Ok(DesignOutcome {
                achieved,
                abs_error: (achieved - target).abs(),
                solution,
            })
        };
        targets.push(MboTargetResult {
            target,
            fraction,
            weighted: outcome(SearchObjective::UncertaintyWeighted)?,
            vanilla: outcome(SearchObjective::Vanilla)?,
        });
    }
    Ok(MboResult {
        task: cfg.task.clone(),
        seed: cfg.seed,
        forward_train_r2,
        targets,
    })
}
