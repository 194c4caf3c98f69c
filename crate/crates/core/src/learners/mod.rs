//! Base learners and the anchored (Δ-encoded) trainers built on them.
//!
//! Every learner sees anchored tuples `[R ‖ Δ]` during training and
//! inference; the baselines see raw inputs.

mod baseline;
mod dataset;
mod forest;
mod ksvm;
mod mlp;
mod model;
mod persist;

pub use baseline::{
    train_baseline, train_ensemble_with_seeds, train_plain, BaselineKind, BaselineModel, LearnerConfig, PlainModel,
};
pub use dataset::{Dataset, Targets};
pub use forest::{Forest, ForestConfig, RegressionTree};
pub use ksvm::{KernelSvm, KsvmConfig};
pub use mlp::{Activation, MlpConfig, Network};
pub(crate) use mlp::{fit as fit_mlp, BatchTargets, Loss};
pub use model::{
    train_anchored_forest, train_anchored_ksvm, train_anchored_mlp, train_anchored_mlp_with, AnchorPairing,
    warm_start_anchored_mlp, DeltaModel, LearnerKind, Probabilities, TargetScaler, Task, TrainedLearner,
};
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};

use crate::encoding::{AnchorPrior, EncodingScheme};
use crate::error::Result;

/// Dispatches to the anchored trainer matching `cfg`.
pub fn train_anchored(
    train: &Dataset,
    cfg: &LearnerConfig,
    scheme: EncodingScheme,
    prior: AnchorPrior,
) -> Result<DeltaModel> {
    match cfg {
        LearnerConfig::Mlp(c) => train_anchored_mlp(train, c, scheme, prior),
        LearnerConfig::Forest(c) => train_anchored_forest(train, c, scheme, prior),
        LearnerConfig::Ksvm(c) => train_anchored_ksvm(train, c, scheme, prior),
    }
}
