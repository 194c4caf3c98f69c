use std::f64::consts::{E, PI};

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Dataset;
use crate::rng::Rng;

const ACKLEY_A: f64 = 20.0;
const ACKLEY_B: f64 = 0.2;
const ACKLEY_C: f64 = 2.0 * PI;

/// Closed-form test functions on fixed domain boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BenchmarkFn {
    /// `−sin(5x²) − x⁴ + 0.3x³ + 2x² + 4.1x` on `[−2.5, 2.5]`.
    Sinusoid,
    /// `sin(x)·cos(5x)·cos(22x)` on `[0, π]`.
    MultiOptima,
    /// On `[−10, 10]²`, minimum 0 at `(1, 3)`.
    Booth,
    /// On `[−10, 10]²`, minimum 0 at `(1, 1)`.
    LeviN13,
    /// On `[−5, 5]^dim` with `a = 20`, `b = 0.2`, `c = 2π`.
    Ackley { dim: usize },
    /// On `[−5, 5]^dim`.
    Griewank { dim: usize },
}

impl BenchmarkFn {
    pub fn name(&self) -> String {
        match self {
            BenchmarkFn::Sinusoid => "sinusoid".into(),
            BenchmarkFn::MultiOptima => "multi-optima".into(),
            BenchmarkFn::Booth => "booth".into(),
            BenchmarkFn::LeviN13 => "levi-n13".into(),
            BenchmarkFn::Ackley { dim } => format!("ackley-{dim}d"),
            BenchmarkFn::Griewank { dim } => format!("griewank-{dim}d"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BenchmarkFn::Sinusoid | BenchmarkFn::MultiOptima => 1,
            BenchmarkFn::Booth | BenchmarkFn::LeviN13 => 2,
            BenchmarkFn::Ackley { dim } | BenchmarkFn::Griewank { dim } => *dim,
        }
    }

    /// Per-coordinate `(lo, hi)`; the same interval for every coordinate.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            BenchmarkFn::Sinusoid => (-2.5, 2.5),
            BenchmarkFn::MultiOptima => (0.0, PI),
            BenchmarkFn::Booth | BenchmarkFn::LeviN13 => (-10.0, 10.0),
            BenchmarkFn::Ackley { .. } | BenchmarkFn::Griewank { .. } => (-5.0, 5.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::invalid(format!("{} needs dim >= 1", self.name())));
        }
        Ok(())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        self.validate()?;
        if x.len() != self.dim() {
            return Err(Error::dims(self.name(), self.dim(), x.len()));
        }
        let (lo, hi) = self.bounds();
        for (coordinate, &value) in x.iter().enumerate() {
            if !(lo..=hi).contains(&value) {
                return Err(Error::OutOfDomain { coordinate, value, lo, hi });
            }
        }
        Ok(())
    }

    /// The function as conventionally written (Booth, Levi and Ackley are
    /// minimization problems).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.raw(x))
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match self {
            BenchmarkFn::Sinusoid => {
                let x = x[0];
                -(5.0 * x * x).sin() - x.powi(4) + 0.3 * x.powi(3) + 2.0 * x * x + 4.1 * x
            }
            BenchmarkFn::MultiOptima => {
                let x = x[0];
                x.sin() * (5.0 * x).cos() * (22.0 * x).cos()
            }
            BenchmarkFn::Booth => {
                let (a, b) = (x[0], x[1]);
                (a + 2.0 * b - 7.0).powi(2) + (2.0 * a + b - 5.0).powi(2)
            }
            BenchmarkFn::LeviN13 => {
                let (a, b) = (x[0], x[1]);
                (3.0 * PI * a).sin().powi(2)
                    + (a - 1.0).powi(2) * (1.0 + (3.0 * PI * b).sin().powi(2))
                    + (b - 1.0).powi(2) * (1.0 + (2.0 * PI * b).sin().powi(2))
            }
            BenchmarkFn::Ackley { .. } => {
                let n = x.len() as f64;
                let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
                let cos = x.iter().map(|v| (ACKLEY_C * v).cos()).sum::<f64>() / n;
                -ACKLEY_A * (-ACKLEY_B * sq.sqrt()).exp() - cos.exp() + ACKLEY_A + E
            }
            BenchmarkFn::Griewank { .. } => {
                let sum = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let prod: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                1.0 + sum - prod
            }
        }
    }

    /// True when optimization maximizes the negated function.
    pub fn is_minimization(&self) -> bool {
        matches!(self, BenchmarkFn::Booth | BenchmarkFn::LeviN13 | BenchmarkFn::Ackley { .. })
    }

    /// Value to maximize: negated for minimization problems.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x)?;
        Ok(if self.is_minimization() { -v } else { v })
    }

    /// Maximum of [`objective`](Self::objective), where known in closed form
    /// or frozen from a dense grid.
    pub fn known_max(&self) -> Option<f64> {
        match self {
            BenchmarkFn::Sinusoid => Some(7.622),
            BenchmarkFn::MultiOptima => Some(0.951),
            BenchmarkFn::Booth | BenchmarkFn::LeviN13 | BenchmarkFn::Ackley { .. } => Some(0.0),
            BenchmarkFn::Griewank { .. } => None,
        }
    }

    /// Largest objective value over a regular grid with `per_dim` points per
    /// coordinate, endpoints included. Returns `(argmax, max)`.
    pub fn grid_max(&self, per_dim: usize) -> Result<(Vec<f64>, f64)> {
        self.validate()?;
        if per_dim < 2 {
            return Err(Error::invalid("a grid needs at least 2 points per dimension"));
        }
        let d = self.dim();
        let (lo, hi) = self.bounds();
        let step = (hi - lo) / (per_dim - 1) as f64;
        let total = per_dim
            .checked_pow(d as u32)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        let sign = if self.is_minimization() { -1.0 } else { 1.0 };
        let mut best = (vec![lo; d], f64::NEG_INFINITY);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rest = flat;
            for xi in x.iter_mut() {
                *xi = (lo + (rest % per_dim) as f64 * step).min(hi);
                rest /= per_dim;
            }
            let v = sign * self.raw(&x);
            if v > best.1 {
                best = (x.clone(), v);
            }
        }
        Ok(best)
    }

    /// `n` points uniform on the domain box.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Array2<f64> {
        let (lo, hi) = self.bounds();
        Array2::from_shape_simple_fn((n, self.dim()), || rng.gen_range(lo..=hi))
    }

    /// Regression dataset of `n` uniform points with the function as target.
    pub fn dataset(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        self.validate()?;
        let x = self.sample(n, rng);
        let y = x.rows().into_iter().map(|r| self.raw(r.as_slice().expect("standard layout"))).collect();
        Dataset::regression_1d(x, y)
    }
}
