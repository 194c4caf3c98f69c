use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Distribution anchors are drawn from.
///
/// Dataset-backed priors sample rows uniformly with replacement, so any
/// number of anchors can be drawn from a small training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnchorPrior {
    /// Rows of the training inputs, `P(R) = P(X)`.
    TrainDistribution { inputs: Arc<Array2<f64>> },
    /// `N(0, I)` in `dim` dimensions.
    StandardNormal { dim: usize },
    /// Rows of some other dataset.
    External { inputs: Arc<Array2<f64>> },
}

impl AnchorPrior {
    pub fn train_distribution(inputs: &Array2<f64>) -> Result<Self> {
        check_backing(inputs)?;
        Ok(AnchorPrior::TrainDistribution {
            inputs: Arc::new(inputs.clone()),
        })
    }

    pub fn external(inputs: &Array2<f64>) -> Result<Self> {
        check_backing(inputs)?;
        Ok(AnchorPrior::External {
            inputs: Arc::new(inputs.clone()),
        })
    }

    pub fn standard_normal(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("standard-normal prior needs dim >= 1"));
        }
        Ok(AnchorPrior::StandardNormal { dim })
    }

    /// Dimension of every anchor this prior produces.
    pub fn dim(&self) -> usize {
        match self {
            AnchorPrior::TrainDistribution { inputs } | AnchorPrior::External { inputs } => inputs.ncols(),
            AnchorPrior::StandardNormal { dim } => *dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnchorPrior::TrainDistribution { .. } => "train-distribution",
            AnchorPrior::StandardNormal { .. } => "standard-normal",
            AnchorPrior::External { .. } => "external",
        }
    }

    pub(crate) fn backing(&self) -> Option<&Array2<f64>> {
        match self {
            AnchorPrior::TrainDistribution { inputs } | AnchorPrior::External { inputs } => Some(inputs),
            AnchorPrior::StandardNormal { .. } => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self.backing() {
            Some(inputs) => check_backing(inputs),
            None if self.dim() == 0 => Err(Error::invalid("standard-normal prior needs dim >= 1")),
            None => Ok(()),
        }
    }

    /// Draws one anchor into `out`. The prior must already be validated.
    pub(crate) fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        match self.backing() {
            Some(inputs) => {
                let row = rng.gen_range(0..inputs.nrows());
                for (o, v) in out.iter_mut().zip(inputs.row(row)) {
                    *o = *v;
                }
            }
            None => {
                for o in out.iter_mut() {
                    *o = rng.sample(StandardNormal);
                }
            }
        }
    }

    /// Draws `k` anchors that are pairwise distinct draws when the backing
    /// dataset has at least `k` rows (falls back to replacement otherwise).
    pub(crate) fn sample_distinct(&self, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        match self.backing() {
            Some(inputs) if inputs.nrows() >= k => index::sample(rng, inputs.nrows(), k)
                .into_iter()
                .map(|i| inputs.row(i).to_vec())
                .collect(),
            _ => (0..k)
                .map(|_| {
                    let mut a = vec![0.0; self.dim()];
                    self.sample_into(rng, &mut a);
                    a
                })
                .collect(),
        }
    }

    /// SHA-256 over the prior kind and its backing data, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name().as_bytes());
        hasher.update((self.dim() as u64).to_le_bytes());
        if let Some(inputs) = self.backing() {
            hasher.update((inputs.nrows() as u64).to_le_bytes());
            for v in inputs.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

fn check_backing(inputs: &Array2<f64>) -> Result<()> {
    if inputs.nrows() == 0 || inputs.ncols() == 0 {
        return Err(Error::Empty("anchor prior dataset".into()));
    }
    Ok(())
}

/// Draws `k` anchors from `prior`.
pub fn sample_anchors(prior: &AnchorPrior, k: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::invalid("anchor count must be at least 1"));
    }
    prior.validate()?;
    Ok((0..k)
        .map(|_| {
            let mut a = vec![0.0; prior.dim()];
            prior.sample_into(rng, &mut a);
            a
        })
        .collect())
}
