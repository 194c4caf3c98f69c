//! One-vs-rest RBF-kernel SVM trained by dual coordinate descent.
//!
//! The bias is folded into the kernel (`k(a, b) + 1`), which leaves a box
//! constrained dual with no equality constraint: every coordinate update is
//! a clipped Newton step.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KsvmConfig {
    /// RBF bandwidth in `exp(−γ‖a − b‖²)`.
    pub gamma: f64,
    /// Box constraint on the dual variables.
    pub c: f64,
    /// Maximum passes over the training rows per class machine.
    pub max_iterations: usize,
    /// Stop once the largest projected-gradient magnitude falls below this.
    pub tolerance: f64,
    /// Anchored copies of each training sample (`A`).
    pub anchor_passes: usize,
    pub seed: u64,
}

impl Default for KsvmConfig {
    fn default() -> Self {
        KsvmConfig {
            gamma: 0.5,
            c: 10.0,
            max_iterations: 500,
            tolerance: 1e-3,
            anchor_passes: 5,
            seed: 0,
        }
    }
}

impl KsvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("kernel bandwidth must be > 0, got {}", self.gamma)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("regularization C must be > 0, got {}", self.c)));
        }
        if self.anchor_passes == 0 {
            return Err(Error::invalid("anchor passes must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSvm {
    support: Array2<f64>,
    /// `α_i y_i` per support row and class.
    coef: Array2<f64>,
    gamma: f64,
}

fn rbf(gamma: f64, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp() + 1.0
}

impl KernelSvm {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, cfg: &KsvmConfig) -> Result<Self> {
        cfg.validate()?;
        let n = x.nrows();
        if n != labels.len() {
            return Err(Error::dims("svm labels", n, labels.len()));
        }
        if n_classes < 2 {
            return Err(Error::invalid(format!("an SVM needs at least 2 classes, got {n_classes}")));
        }
        for c in 0..n_classes {
            if !labels.contains(&c) {
                return Err(Error::invalid(format!("class {c} has no training samples")));
            }
        }
        let mut gram = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let k = rbf(cfg.gamma, x.row(i), x.row(j));
                gram[[i, j]] = k;
                gram[[j, i]] = k;
            }
        }
        let mut coef = Array2::<f64>::zeros((n, n_classes));
        let mut rng = seeded(cfg.seed);
        let mut order: Vec<usize> = (0..n).collect();
        for class in 0..n_classes {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let mut alpha = vec![0.0; n];
            let mut f = vec![0.0; n];
            for _ in 0..cfg.max_iterations {
                order.shuffle(&mut rng);
                let mut worst = 0.0f64;
                for &i in &order {
                    let g = y[i] * f[i] - 1.0;
                    let pg = if alpha[i] <= 0.0 {
                        g.min(0.0)
                    } else if alpha[i] >= cfg.c {
                        g.max(0.0)
                    } else {
                        g
                    };
                    worst = worst.max(pg.abs());
                    if pg.abs() <= 1e-12 {
                        continue;
                    }
                    let updated = (alpha[i] - g / gram[[i, i]]).clamp(0.0, cfg.c);
                    let delta = updated - alpha[i];
                    if delta != 0.0 {
                        alpha[i] = updated;
                        let step = delta * y[i];
                        for (fj, kij) in f.iter_mut().zip(gram.row(i)) {
                            *fj += step * kij;
                        }
                    }
                }
                if worst < cfg.tolerance {
                    break;
                }
            }
            for i in 0..n {
                coef[[i, class]] = alpha[i] * y[i];
            }
        }
        let keep: Vec<usize> = (0..n).filter(|&i| coef.row(i).iter().any(|c| *c != 0.0)).collect();
        Ok(KernelSvm {
            support: x.select(Axis(0), &keep),
            coef: coef.select(Axis(0), &keep),
            gamma: cfg.gamma,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.coef.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.support.ncols()
    }

    pub fn support_count(&self) -> usize {
        self.support.nrows()
    }

    /// `n × C` one-vs-rest decision values.
    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes()));
        for (mut o, row) in out.rows_mut().into_iter().zip(x.rows()) {
            for (sv, c) in self.support.rows().into_iter().zip(self.coef.rows()) {
                let k = rbf(self.gamma, sv, row);
                o.scaled_add(k, &c);
            }
        }
        out
    }
}
