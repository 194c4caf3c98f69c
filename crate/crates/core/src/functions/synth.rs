//! Synthetic classification data, splits and input corruptions.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Dataset;
use crate::rng::{seeded, stream};

/// Shuffles with `seed` and returns the first `n_train` rows and the rest.
pub fn split(ds: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!("n_train must lie in 1..{n}, got {n_train}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    Ok((ds.subset(&order[..n_train])?, ds.subset(&order[n_train..])?))
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::invalid(format!("noise sd must be a finite value >= 0, got {sd}")));
    }
    Normal::new(0.0, sd).map_err(|e| Error::invalid(e.to_string()))
}

/// Two interleaved unit half-circles. Class 0 is `(cos t, sin t)` and
/// class 1 is `(1 − cos t, 0.5 − sin t)` with `t ~ U[0, π]`; class 0
/// receives the extra point when `n` is odd.
pub fn make_two_moons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid(format!("two moons needs n >= 2, got {n}")));
    }
    let noise = normal(noise_sd)?;
    let mut rng = seeded(seed);
    let n0 = n - n / 2;
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.gen_range(0.0..=PI);
        let (a, b, label) = if i < n0 {
            (t.cos(), t.sin(), 0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        x[[i, 0]] = a;
        x[[i, 1]] = b;
        if noise_sd > 0.0 {
            x[[i, 0]] += noise.sample(&mut rng);
            x[[i, 1]] += noise.sample(&mut rng);
        }
        labels.push(label);
    }
    Dataset::classification(x, labels, 2)
}

/// Isotropic Gaussian blobs; point `i` belongs to class `i mod C`.
pub fn make_blobs(centers: &[Vec<f64>], n: usize, sd: f64, seed: u64) -> Result<Dataset> {
    let first = centers.first().ok_or_else(|| Error::Empty("blob centers".into()))?;
    let d = first.len();
    if let Some(c) = centers.iter().find(|c| c.len() != d) {
        return Err(Error::dims("blob center", d, c.len()));
    }
    if n < 2 {
        return Err(Error::invalid(format!("blobs need n >= 2, got {n}")));
    }
    let noise = normal(sd)?;
    let mut rng = seeded(seed);
    let k = centers.len();
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        for j in 0..d {
            x[[i, j]] = centers[c][j] + if sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        }
        labels.push(c);
    }
    Dataset::classification(x, labels, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionKind {
    /// Adds `N(0, (0.1·i)²)` per feature.
    GaussianNoise,
    /// Adds `U(−0.15·i, 0.15·i)` per feature.
    UniformNoise,
    /// Moves every row by `0.2·i` along the unit all-ones direction.
    FeatureShift,
}

/// Input corruption at intensity `i ∈ 1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub intensity: u8,
    pub seed: u64,
}

pub const MAX_INTENSITY: u8 = 5;

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_INTENSITY).contains(&self.intensity) {
            return Err(Error::invalid(format!(
                "corruption intensity must lie in 1..={MAX_INTENSITY}, got {}",
                self.intensity
            )));
        }
        Ok(())
    }

    /// Scale of the perturbation: a standard deviation, half-width or shift length.
    pub fn magnitude(&self) -> f64 {
        let i = f64::from(self.intensity);
        match self.kind {
            CorruptionKind::GaussianNoise => 0.1 * i,
            CorruptionKind::UniformNoise => 0.15 * i,
            CorruptionKind::FeatureShift => 0.2 * i,
        }
    }
}

/// Perturbed copy of `ds`; targets are untouched.
///
/// The noise draws come from a stream keyed on the seed only, so the same
/// seed at two intensities applies the same standardized noise at two scales.
pub fn corrupt(ds: &Dataset, spec: &CorruptionSpec) -> Result<Dataset> {
    spec.validate()?;
    let m = spec.magnitude();
    let mut rng = stream(spec.seed, 0xC0);
    let mut x = ds.inputs().clone();
    match spec.kind {
        CorruptionKind::GaussianNoise => {
            let unit = normal(1.0)?;
            x.mapv_inplace(|v| v + m * unit.sample(&mut rng));
        }
        CorruptionKind::UniformNoise => x.mapv_inplace(|v| v + m * rng.gen_range(-1.0..=1.0)),
        CorruptionKind::FeatureShift => {
            let step = m / (ds.dim() as f64).sqrt();
            x.mapv_inplace(|v| v + step);
        }
    }
    ds.with_inputs(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Targets;

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let ds = Dataset::regression_1d(x, (0..10).map(f64::from).collect()).unwrap();
        let (tr, te) = split(&ds, 2, 4).unwrap();
        assert_eq!((tr.len(), te.len()), (2, 8));
        let mut all: Vec<f64> = tr.inputs().iter().chain(te.inputs().iter()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(split(&ds, 2, 4).unwrap().0, tr);
        assert!(split(&ds, 10, 4).is_err());
        assert!(split(&ds, 0, 4).is_err());
    }

    #[test]
    fn noiseless_moons_lie_on_circles() {
        let ds = make_two_moons(100, 0.0, 1).unwrap();
        let (labels, _) = ds.labels().unwrap();
        assert_eq!(labels.iter().filter(|l| **l == 0).count(), 50);
        for (row, &l) in ds.inputs().rows().into_iter().zip(labels) {
            if l == 0 {
                assert!((row[0].hypot(row[1]) - 1.0).abs() < 1e-12);
                assert!(row[1] >= 0.0);
            } else {
                assert!(((1.0 - row[0]).hypot(0.5 - row[1]) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(make_two_moons(100, 0.0, 1).unwrap(), ds);
        assert!(make_two_moons(1, 0.0, 1).is_err());
        assert!(make_two_moons(10, -1.0, 1).is_err());
    }

    #[test]
    fn noiseless_blobs_sit_on_centers() {
        let centers = vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 4.0]];
        let ds = make_blobs(&centers, 30, 0.0, 2).unwrap();
        let (labels, k) = ds.labels().unwrap();
        assert_eq!(k, 3);
        for (row, &l) in ds.inputs().rows().into_iter().zip(labels) {
            assert_eq!(row.to_vec(), centers[l]);
        }
    }

    fn mean_abs_change(a: &Dataset, b: &Dataset) -> f64 {
        (b.inputs() - a.inputs()).mapv(f64::abs).mean().unwrap()
    }

    #[test]
    fn corruption_grows_with_intensity_and_keeps_labels() {
        let ds = make_two_moons(200, 0.1, 3).unwrap();
        for kind in [CorruptionKind::GaussianNoise, CorruptionKind::UniformNoise, CorruptionKind::FeatureShift] {
            let mut last = 0.0;
            for intensity in 1..=5 {
                let c = corrupt(&ds, &CorruptionSpec { kind, intensity, seed: 7 }).unwrap();
                assert_eq!(c.targets(), ds.targets());
                let change = mean_abs_change(&ds, &c);
                assert!(change > last, "{kind:?} at {intensity}");
                last = change;
            }
        }
        let zero = CorruptionSpec {
            kind: CorruptionKind::GaussianNoise,
            intensity: 0,
            seed: 0,
        };
        assert!(corrupt(&ds, &zero).is_err());
        assert!(matches!(ds.targets(), Targets::Classes { .. }));
    }
}
