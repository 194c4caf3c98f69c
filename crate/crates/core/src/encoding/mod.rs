//! Anchors, pretext encodings and anchor-marginalized inference.

mod logits;
mod marginal;
mod prior;
mod scheme;

pub use logits::{predictive_entropy, scale_logits, softmax, LogitScaling, ScalingMode, DEFAULT_T_MIN, T_MAX};
pub use marginal::{marginalized_predict, marginalized_predict_batch, AnchoredPredictor, PredictionSummary};
pub use prior::{sample_anchors, AnchorPrior};
pub use scheme::{decode, encode, AnchoredInput, EncodingScheme};
