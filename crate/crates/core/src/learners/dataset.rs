use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supervision attached to a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Targets {
    /// `n × k` real targets.
    Regression(Array2<f64>),
    /// Labels in `0..n_classes`.
    Classes { labels: Vec<usize>, n_classes: usize },
}

/// Inputs with their targets. Construction validates every invariant, so a
/// `Dataset` is never empty and never holds non-finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Array2<f64>,
    targets: Targets,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn regression(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        let ds = Dataset {
            inputs,
            targets: Targets::Regression(targets),
            feature_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Regression with a single target column.
    pub fn regression_1d(inputs: Array2<f64>, targets: Vec<f64>) -> Result<Self> {
        let n = targets.len();
        let targets = Array2::from_shape_vec((n, 1), targets).map_err(|e| Error::invalid(e.to_string()))?;
        Self::regression(inputs, targets)
    }

    pub fn classification(inputs: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let ds = Dataset {
            inputs,
            targets: Targets::Classes { labels, n_classes },
            feature_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::dims("feature names", self.dim(), names.len()));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.inputs.nrows();
        if n == 0 || self.inputs.ncols() == 0 {
            return Err(Error::Empty("dataset".into()));
        }
        if let Some(pos) = self.inputs.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / self.inputs.ncols(), pos % self.inputs.ncols());
            return Err(Error::invalid(format!("non-finite input at row {r}, column {c}")));
        }
        match &self.targets {
            Targets::Regression(t) => {
                if t.nrows() != n {
                    return Err(Error::dims("target rows", n, t.nrows()));
                }
                if t.ncols() == 0 {
                    return Err(Error::Empty("target columns".into()));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("non-finite regression target"));
                }
            }
            Targets::Classes { labels, n_classes } => {
                if labels.len() != n {
                    return Err(Error::dims("labels", n, labels.len()));
                }
                if let Some(bad) = labels.iter().find(|l| **l >= *n_classes) {
                    return Err(Error::invalid(format!("label {bad} is not below the class count {n_classes}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn regression_targets(&self) -> Result<&Array2<f64>> {
        match &self.targets {
            Targets::Regression(t) => Ok(t),
            Targets::Classes { .. } => Err(Error::invalid("expected regression targets, found class labels")),
        }
    }

    pub fn labels(&self) -> Result<(&[usize], usize)> {
        match &self.targets {
            Targets::Classes { labels, n_classes } => Ok((labels, *n_classes)),
            Targets::Regression(_) => Err(Error::invalid("expected class labels, found regression targets")),
        }
    }

    /// Output width a model fitted on this dataset produces.
    pub fn output_dim(&self) -> usize {
        match &self.targets {
            Targets::Regression(t) => t.ncols(),
            Targets::Classes { n_classes, .. } => *n_classes,
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Empty("subset".into()));
        }
        if let Some(bad) = indices.iter().find(|i| **i >= self.len()) {
            return Err(Error::invalid(format!("row index {bad} out of range")));
        }
        let targets = match &self.targets {
            Targets::Regression(t) => Targets::Regression(t.select(Axis(0), indices)),
            Targets::Classes { labels, n_classes } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        };
        Ok(Dataset {
            inputs: self.inputs.select(Axis(0), indices),
            targets,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Same targets, new inputs of identical shape.
    pub fn with_inputs(&self, inputs: Array2<f64>) -> Result<Dataset> {
        if inputs.dim() != self.inputs.dim() {
            return Err(Error::invalid(format!(
                "replacement inputs have shape {:?}, expected {:?}",
                inputs.dim(),
                self.inputs.dim()
            )));
        }
        let ds = Dataset {
            inputs,
            targets: self.targets.clone(),
            feature_names: self.feature_names.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }
}
