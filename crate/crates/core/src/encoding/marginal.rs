//! Anchor marginalization.
//!
//! For an input `x` and anchors `R_1..R_K` drawn from the prior, a Δ-model
//! is evaluated on every tuple `(R_k, Δ(x, R_k))`. The mean of those `K`
//! predictions is the point estimate and their population variance (divide
//! by `K`) is the uncertainty.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::prior::AnchorPrior;
use super::scheme::EncodingScheme;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A predictor over anchored tuples.
pub trait AnchoredPredictor {
    fn scheme(&self) -> EncodingScheme;

    /// Dimension `d` of the raw inputs.
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// Predicts one row per tuple. `tuples` has `scheme().tuple_dim(d)` columns.
    fn predict_tuples(&self, tuples: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

impl<T: AnchoredPredictor + ?Sized> AnchoredPredictor for &T {
    fn scheme(&self) -> EncodingScheme {
        (**self).scheme()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn predict_tuples(&self, tuples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        (**self).predict_tuples(tuples)
    }
}

/// Anchor-marginalized prediction for a single input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub mean: Array1<f64>,
    /// Per-output population variance across anchors.
    pub variance: Array1<f64>,
    /// `K × k` raw predictions, in anchor-sample order.
    pub per_anchor: Array2<f64>,
    /// Sum of `variance`.
    pub total_variance: f64,
}

impl PredictionSummary {
    /// Summarizes `K × k` per-anchor predictions.
    ///
    /// Uses Welford updates so that identical rows yield a variance of
    /// exactly zero.
    pub fn from_rows(per_anchor: Array2<f64>) -> Result<Self> {
        let (k, outputs) = per_anchor.dim();
        if k == 0 || outputs == 0 {
            return Err(Error::Empty("per-anchor predictions".into()));
        }
        let mut mean = Array1::<f64>::zeros(outputs);
        let mut m2 = Array1::<f64>::zeros(outputs);
        for (i, row) in per_anchor.rows().into_iter().enumerate() {
            let count = (i + 1) as f64;
            for j in 0..outputs {
                let delta = row[j] - mean[j];
                mean[j] += delta / count;
                m2[j] += delta * (row[j] - mean[j]);
            }
        }
        let variance = m2.mapv(|v| (v / k as f64).max(0.0));
        let total_variance = variance.sum();
        Ok(PredictionSummary {
            mean,
            variance,
            per_anchor,
            total_variance,
        })
    }

    /// Number of anchors `K`.
    pub fn anchors(&self) -> usize {
        self.per_anchor.nrows()
    }

    /// Standard deviation of a scalar output (`sqrt(total_variance)`).
    pub fn std_dev(&self) -> f64 {
        self.total_variance.sqrt()
    }
}

/// Builds the `K` tuples for `x`, drawing anchors from `prior` in order.
pub(crate) fn anchored_tuples(
    scheme: EncodingScheme,
    x: ArrayView1<'_, f64>,
    prior: &AnchorPrior,
    k: usize,
    rng: &mut Rng,
    out: &mut [f64],
) {
    let d = x.len();
    let per = scheme.anchors_per_input();
    let width = scheme.tuple_dim(d);
    let x = x.to_vec();
    let mut anchors = vec![vec![0.0; d]; per];
    for row in out.chunks_exact_mut(width).take(k) {
        for a in anchors.iter_mut() {
            prior.sample_into(rng, a);
        }
        let refs: Vec<&[f64]> = anchors.iter().map(Vec::as_slice).collect();
        scheme.write_tuple(&x, &refs, row);
    }
}

fn check_compat<M: AnchoredPredictor + ?Sized>(model: &M, prior: &AnchorPrior, d: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("anchor count K must be at least 1"));
    }
    prior.validate()?;
    if d != model.input_dim() {
        return Err(Error::dims("input", model.input_dim(), d));
    }
    if prior.dim() != d {
        return Err(Error::dims("anchor prior", d, prior.dim()));
    }
    Ok(())
}

/// Marginalizes `model` over `k` anchors for the input `x`.
pub fn marginalized_predict<M: AnchoredPredictor + ?Sized>(
    model: &M,
    x: &[f64],
    prior: &AnchorPrior,
    k: usize,
    rng: &mut Rng,
) -> Result<PredictionSummary> {
    let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(marginalized_predict_batch(model, xs, prior, k, rng)?.remove(0))
}

/// Row-wise [`marginalized_predict`], evaluated as one batch.
///
/// Anchors are drawn for each row in turn, so the result equals calling
/// [`marginalized_predict`] on each row with the same generator.
pub fn marginalized_predict_batch<M: AnchoredPredictor + ?Sized>(
    model: &M,
    xs: ArrayView2<'_, f64>,
    prior: &AnchorPrior,
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<PredictionSummary>> {
    let (n, d) = xs.dim();
    check_compat(model, prior, d, k)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let scheme = model.scheme();
    let width = scheme.tuple_dim(d);
    let mut tuples = Array2::<f64>::zeros((n * k, width));
    {
        let flat = tuples.as_slice_mut().expect("fresh arrays are contiguous");
        for (i, block) in flat.chunks_exact_mut(k * width).enumerate() {
            anchored_tuples(scheme, xs.row(i), prior, k, rng, block);
        }
    }
    let preds = model.predict_tuples(tuples.view())?;
    if preds.nrows() != n * k {
        return Err(Error::dims("model output rows", n * k, preds.nrows()));
    }
    (0..n)
        .map(|i| PredictionSummary::from_rows(preds.slice(ndarray::s![i * k..(i + 1) * k, ..]).to_owned()))
        .collect()
}
