//! Uncertainty-aware logit scaling and softmax entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp for the scaling factor `t = 0.5 − σ²`.
pub const DEFAULT_T_MIN: f64 = 0.05;

/// Upper clamp; a zero-variance prediction is scaled by exactly this.
pub const T_MAX: f64 = 0.5;

/// Whether each logit gets its own factor or all share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// `t_i = 0.5 − σ²_i` per logit.
    #[default]
    Elementwise,
    /// One `t = 0.5 − total_variance / k` for every logit.
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitScaling {
    pub t_min: f64,
    pub mode: ScalingMode,
}

impl Default for LogitScaling {
    fn default() -> Self {
        LogitScaling {
            t_min: DEFAULT_T_MIN,
            mode: ScalingMode::Elementwise,
        }
    }
}

impl LogitScaling {
    pub fn apply(&self, mean_logits: &[f64], variance: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            ScalingMode::Elementwise => scale_logits(mean_logits, variance, self.t_min),
            ScalingMode::Scalar => {
                check(mean_logits, variance, self.t_min)?;
                let avg = variance.iter().sum::<f64>() / variance.len().max(1) as f64;
                let t = factor(avg, self.t_min);
                Ok(mean_logits.iter().map(|l| l * t).collect())
            }
        }
    }
}

fn factor(variance: f64, t_min: f64) -> f64 {
    (T_MAX - variance).clamp(t_min, T_MAX)
}

fn check(mean_logits: &[f64], variance: &[f64], t_min: f64) -> Result<()> {
    if mean_logits.len() != variance.len() {
        return Err(Error::dims("logit variance", mean_logits.len(), variance.len()));
    }
    if !(t_min > 0.0 && t_min <= T_MAX) {
        return Err(Error::invalid(format!("t_min must lie in (0, {T_MAX}], got {t_min}")));
    }
    if let Some((i, v)) = variance.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::invalid(format!("variance[{i}] = {v} is negative")));
    }
    Ok(())
}

/// `mean_i · clamp(0.5 − variance_i, t_min, 0.5)`.
pub fn scale_logits(mean_logits: &[f64], variance: &[f64], t_min: f64) -> Result<Vec<f64>> {
    check(mean_logits, variance, t_min)?;
    Ok(mean_logits
        .iter()
        .zip(variance)
        .map(|(l, v)| l * factor(*v, t_min))
        .collect())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn predictive_entropy(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Empty("probability vector".into()));
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("not a probability distribution (sum = {sum})")));
    }
    Ok(-probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>())
}
