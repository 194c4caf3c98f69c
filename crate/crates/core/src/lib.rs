//! Anchored (Δ-encoded) predictive uncertainty for arbitrary learners.

// Validation uses `!(x >= 0.0)` so that NaN is rejected along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoding;
pub mod error;
pub mod experiment;
pub mod functions;
pub mod learners;
pub mod mbo;
pub mod metrics;
pub mod rng;
pub mod smo;

pub use error::{Error, Result};

/// Guide chapters, compiled so their snippets run as doc tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/anchoring.md")]
    mod anchoring {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/inverse-design.md")]
    mod inverse_design {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
