//! Sequential model optimization with expected improvement.
//!
//! Each iteration refits an anchored MLP on every observation so far,
//! scores a fresh candidate pool by expected improvement under the
//! anchor-marginalized mean and spread, and queries the best candidate.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::encoding::{marginalized_predict_batch, AnchorPrior, AnchoredPredictor, EncodingScheme};
use crate::error::{Error, Result};
use crate::functions::{write_table, BenchmarkFn, Table};
use crate::learners::{train_anchored_mlp, warm_start_anchored_mlp, Dataset, DeltaModel, MlpConfig};
use crate::rng::{derive_seed, stream};

/// Standard deviations below this are treated as this value.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// `E[max(0, Y − best)]` for `Y ~ N(mu, sigma²)`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> Result<f64> {
    if !(mu.is_finite() && sigma.is_finite() && best.is_finite()) {
        return Err(Error::invalid(format!("non-finite EI input (mu {mu}, sigma {sigma}, best {best})")));
    }
    if sigma < 0.0 {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let s = sigma.max(SIGMA_FLOOR);
    let gap = mu - best;
    let z = gap / s;
    let unit = Normal::standard();
    Ok((gap * unit.cdf(z) + s * unit.pdf(z)).max(0.0))
}

/// The chosen candidate and its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub index: usize,
    pub x: Vec<f64>,
    pub ei: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Highest-EI candidate of `pool`; ties go to the lowest index.
pub fn propose<M: AnchoredPredictor + ?Sized>(
    model: &M,
    prior: &AnchorPrior,
    anchors: usize,
    pool: ArrayView2<'_, f64>,
    best: f64,
    rng: &mut crate::rng::Rng,
) -> Result<Proposal> {
    if pool.nrows() == 0 {
        return Err(Error::Empty("candidate pool".into()));
    }
    if model.output_dim() != 1 {
        return Err(Error::dims("surrogate outputs", 1, model.output_dim()));
    }
    let summaries = marginalized_predict_batch(model, pool, prior, anchors, rng)?;
    let mut chosen: Option<Proposal> = None;
    for (index, s) in summaries.iter().enumerate() {
        let (mu, sigma) = (s.mean[0], s.std_dev());
        let ei = expected_improvement(mu, sigma, best)?;
        if chosen.as_ref().is_none_or(|c| ei > c.ei) {
            chosen = Some(Proposal {
                index,
                x: pool.row(index).to_vec(),
                ei,
                mu,
                sigma,
            });
        }
    }
    Ok(chosen.expect("pool is nonempty"))
}

/// Refit epochs per input dimension when `refit_epochs` is unset.
pub const EPOCHS_PER_DIM: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoConfig {
    pub objective: BenchmarkFn,
    pub n_init: usize,
    pub n_iterations: usize,
    /// Uniform candidates drawn afresh every iteration.
    pub pool_size: usize,
    /// Anchors per candidate during scoring (`K`).
    pub anchors: usize,
    pub hidden_layers: Vec<usize>,
    /// Epochs per refit; `None` means [`EPOCHS_PER_DIM`] times the input dimension.
    pub refit_epochs: Option<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Start each refit from the previous iteration's weights.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            objective: BenchmarkFn::Sinusoid,
            n_init: 6,
            n_iterations: 50,
            pool_size: 2048,
            anchors: 8,
            hidden_layers: vec![128, 128, 128],
            refit_epochs: None,
            learning_rate: 1e-3,
            batch_size: 32,
            warm_start: false,
            seed: 0,
        }
    }
}

impl SmoConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if self.n_init < 2 {
            return Err(Error::invalid(format!("n_init must be >= 2, got {}", self.n_init)));
        }
        if self.pool_size == 0 {
            return Err(Error::invalid("pool_size must be >= 1"));
        }
        if self.anchors == 0 {
            return Err(Error::invalid("anchors must be >= 1"));
        }
        self.mlp(0).validate()
    }

    pub fn epochs(&self) -> usize {
        self.refit_epochs.unwrap_or(EPOCHS_PER_DIM * self.objective.dim())
    }

    fn mlp(&self, seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_layers: self.hidden_layers.clone(),
            learning_rate: self.learning_rate,
            epochs: self.epochs(),
            batch_size: self.batch_size,
            seed,
            ..MlpConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best: f64,
    pub ei: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoTrace {
    pub objective: BenchmarkFn,
    pub initial_x: Vec<Vec<f64>>,
    pub initial_y: Vec<f64>,
    pub records: Vec<SmoRecord>,
}

impl SmoTrace {
    pub fn initial_best(&self) -> f64 {
        self.initial_y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best objective value observed, including the initial design.
    pub fn best(&self) -> f64 {
        self.records.last().map_or_else(|| self.initial_best(), |r| r.best)
    }

    /// One row per iteration: `iteration, x0.., y, best, ei, mu, sigma`.
    pub fn to_table(&self) -> Table {
        let d = self.objective.dim();
        let mut columns = vec!["iteration".to_owned()];
        columns.extend((0..d).map(|j| format!("x{j}")));
        columns.extend(["y", "best", "ei", "mu", "sigma"].map(String::from));
        let mut table = Table::new(columns);
        for r in &self.records {
            let mut row = vec![r.iteration as f64];
            row.extend(&r.x);
            row.extend([r.y, r.best, r.ei, r.mu, r.sigma]);
            table.rows.push(row);
        }
        table
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_table(&self.to_table(), path)
    }
}

/// Runs the loop; the trace has exactly `n_iterations` records.
pub fn run_smo(cfg: &SmoConfig) -> Result<SmoTrace> {
    cfg.validate()?;
    let f = cfg.objective;
    let mut design_rng = stream(cfg.seed, 0);
    let init = f.sample(cfg.n_init, &mut design_rng);
    let mut xs: Vec<Vec<f64>> = init.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut ys = xs.iter().map(|x| f.objective(x)).collect::<Result<Vec<_>>>()?;
    let initial_x = xs.clone();
    let initial_y = ys.clone();
    let mut best_i = argmax(&ys);
    let mut records = Vec::with_capacity(cfg.n_iterations);
    let mut pool_rng = stream(cfg.seed, 1);
    let mut anchor_rng = stream(cfg.seed, 2);
    let mut previous: Option<DeltaModel> = None;
    // The surrogate sees coordinates rescaled to [-1, 1].
    let (lo, hi) = f.bounds();
    let to_unit = |v: f64| 2.0 * (v - lo) / (hi - lo) - 1.0;
    for iteration in 0..cfg.n_iterations {
        let n = xs.len();
        let x = Array2::from_shape_fn((n, f.dim()), |(i, j)| to_unit(xs[i][j]));
        let train = Dataset::regression_1d(x.clone(), ys.clone())?;
        let prior = AnchorPrior::train_distribution(&x)?;
        let mlp = cfg.mlp(derive_seed(cfg.seed, iteration as u64 + 1));
        let model = match (&previous, cfg.warm_start) {
            (Some(prev), true) => warm_start_anchored_mlp(prev, &train, &mlp, prior.clone())?,
            _ => train_anchored_mlp(&train, &mlp, EncodingScheme::SingleAnchor, prior.clone())?,
        };
        let pool = f.sample(cfg.pool_size, &mut pool_rng);
        let best = ys[best_i];
        let mut p = propose(&model, &prior, cfg.anchors, pool.mapv(to_unit).view(), best, &mut anchor_rng)?;
        p.x = pool.row(p.index).to_vec();
        let y = f.objective(&p.x)?;
        xs.push(p.x.clone());
        ys.push(y);
        if y > best {
            best_i = ys.len() - 1;
        }
        previous = Some(model);
        log::debug!("{} iter {iteration}: y {y:.5}, best {:.5}", f.name(), ys[best_i]);
        records.push(SmoRecord {
            iteration,
            x: p.x,
            y,
            best: ys[best_i],
            ei: p.ei,
            mu: p.mu,
            sigma: p.sigma,
        });
    }
    Ok(SmoTrace {
        objective: f,
        initial_x,
        initial_y,
        records,
    })
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &y)| if y > b.1 { (i, y) } else { b })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, ArrayView2};

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement(0.0, 0.0, 0.5).unwrap(), 0.0);
        assert!((expected_improvement(1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(expected_improvement(f64::NAN, 1.0, 0.0).is_err());
        assert!(expected_improvement(0.0, -1.0, 0.0).is_err());
    }

    /// Predicts the first coordinate of the encoded input plus the anchor,
    /// i.e. x itself, with no anchor dependence.
    struct Exact;
    impl AnchoredPredictor for Exact {
        fn scheme(&self) -> EncodingScheme {
            EncodingScheme::SingleAnchor
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn predict_tuples(&self, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
            Ok(Array2::from_shape_fn((t.nrows(), 1), |(i, _)| t[[i, 0]] + t[[i, 1]]))
        }
    }

    #[test]
    fn propose_rules() {
        let prior = AnchorPrior::standard_normal(1).unwrap();
        let mut rng = crate::rng::seeded(0);
        let one = array![[0.3]];
        assert_eq!(propose(&Exact, &prior, 4, one.view(), 10.0, &mut rng).unwrap().index, 0);
        let pool = array![[-1.0], [0.2], [2.0], [0.5]];
        let p = propose(&Exact, &prior, 4, pool.view(), 1.0, &mut rng).unwrap();
        assert_eq!(p.index, 2);
        assert!((p.ei - 1.0).abs() < 1e-9);
        let tied = array![[0.7], [0.7], [0.1]];
        assert_eq!(propose(&Exact, &prior, 4, tied.view(), 0.0, &mut rng).unwrap().index, 0);
        assert!(propose(&Exact, &prior, 4, Array2::zeros((0, 1)).view(), 0.0, &mut rng).is_err());
    }

    fn quick(objective: BenchmarkFn, n_iterations: usize) -> SmoConfig {
        SmoConfig {
            objective,
            n_iterations,
            pool_size: 64,
            hidden_layers: vec![16, 16],
            refit_epochs: Some(20),
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_iterations_keeps_initial_design() {
        let t = run_smo(&quick(BenchmarkFn::Booth, 0)).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.initial_y.len(), 6);
        assert_eq!(t.best(), t.initial_y.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn trace_is_monotone_and_deterministic() {
        let cfg = quick(BenchmarkFn::MultiOptima, 4);
        let t = run_smo(&cfg).unwrap();
        assert_eq!(t.records.len(), 4);
        let mut last = t.initial_best();
        for r in &t.records {
            assert!(r.best >= last);
            last = r.best;
        }
        assert_eq!(run_smo(&cfg).unwrap(), t);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_smo(&SmoConfig { n_init: 1, ..quick(BenchmarkFn::Booth, 1) }).is_err());
        assert!(run_smo(&SmoConfig { pool_size: 0, ..quick(BenchmarkFn::Booth, 1) }).is_err());
    }

    #[test]
    fn trace_table_layout() {
        let t = run_smo(&quick(BenchmarkFn::Booth, 2)).unwrap();
        let table = t.to_table();
        assert_eq!(table.columns, ["iteration", "x0", "x1", "y", "best", "ei", "mu", "sigma"]);
        assert_eq!(table.rows.len(), 2);
    }
}
