//! Regression, ranking and calibration metrics.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of equal-width confidence bins.
pub const DEFAULT_ECE_BINS: usize = 15;
/// Probabilities are floored here before taking logs.
pub const NLL_PROBABILITY_FLOOR: f64 = 1e-12;

fn paired(context: &str, a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims(context, a.len(), b.len()));
    }
    if a.len() < min {
        return Err(Error::invalid(format!("{context} needs at least {min} samples, got {}", a.len())));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    paired("mae", pred, truth, 1)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Coefficient of determination, `1 − SS_res / SS_tot`.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    paired("r2", pred, truth, 2)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R² of a constant target".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    paired("pearson", a, b, 2)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedMetric("correlation with a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    paired("spearman", a, b, 2)?;
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("spearman input contains NaN"));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Area under the ROC curve with `positive` as the positive class:
/// `P(pos > neg) + ½ P(pos = neg)`.
pub fn auroc(negative: &[f64], positive: &[f64]) -> Result<f64> {
    if negative.is_empty() || positive.is_empty() {
        return Err(Error::Empty("auroc needs both negative and positive scores".into()));
    }
    let mut all: Vec<f64> = negative.iter().chain(positive).copied().collect();
    if all.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("auroc input contains NaN"));
    }
    let ranks = average_ranks(&all);
    all.clear();
    let (n0, n1) = (negative.len() as f64, positive.len() as f64);
    let pos_rank_sum: f64 = ranks[negative.len()..].iter().sum();
    Ok((pos_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean confidence of the rows in the bin (0 when empty).
    pub confidence: f64,
    pub accuracy: f64,
    /// Fraction of all rows that fell in the bin.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub ece: f64,
    /// Mean `−ln max(p[label], 1e-12)`.
    pub nll: f64,
    pub brier: f64,
    pub accuracy: f64,
    pub bin_count: usize,
    pub bins: Vec<CalibrationBin>,
}

/// Expected calibration error over equal-width confidence bins, plus NLL,
/// Brier score and accuracy. Confidence is the largest class probability;
/// the predicted class is the first index attaining it.
pub fn ece(probs: ArrayView2<'_, f64>, labels: &[usize], bins: usize) -> Result<CalibrationReport> {
    let (n, c) = probs.dim();
    if labels.len() != n {
        return Err(Error::dims("calibration labels", n, labels.len()));
    }
    if n == 0 || c == 0 {
        return Err(Error::Empty("calibration inputs".into()));
    }
    if bins == 0 {
        return Err(Error::invalid("ece needs at least one bin"));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    let (mut nll, mut brier, mut hits) = (0.0, 0.0, 0usize);
    for (i, (row, &label)) in probs.rows().into_iter().zip(labels).enumerate() {
        if label >= c {
            return Err(Error::invalid(format!("label {label} at row {i} is not below the class count {c}")));
        }
        let sum: f64 = row.sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("row {i} is not a probability distribution")));
        }
        let (pred, conf) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, &p)| if p > best.1 { (j, p) } else { best });
        let b = ((conf * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += conf;
        if pred == label {
            correct[b] += 1;
            hits += 1;
        }
        nll -= row[label].max(NLL_PROBABILITY_FLOOR).ln();
        brier += row
            .iter()
            .enumerate()
            .map(|(j, p)| (p - f64::from(u8::from(j == label))).powi(2))
            .sum::<f64>();
    }
    let nf = n as f64;
    let mut ece = 0.0;
    let bins_out = (0..bins)
        .map(|b| {
            let k = count[b];
            let (confidence, accuracy) = if k > 0 {
                (conf_sum[b] / k as f64, correct[b] as f64 / k as f64)
            } else {
                (0.0, 0.0)
            };
            let weight = k as f64 / nf;
            ece += weight * (accuracy - confidence).abs();
            CalibrationBin {
                lower: b as f64 / bins as f64,
                upper: (b + 1) as f64 / bins as f64,
                count: k,
                confidence,
                accuracy,
                weight,
            }
        })
        .collect();
    Ok(CalibrationReport {
        ece,
        nll: nll / nf,
        brier: brier / nf,
        accuracy: hits as f64 / nf,
        bin_count: bins,
        bins: bins_out,
    })
}

/// Population mean and standard deviation.
pub fn mean_sd(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { (s[m - 1] + s[m]) / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn mae_and_r2() {
        let t = [1.0, 2.0, 4.0];
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
        assert_eq!(r2(&t, &t).unwrap(), 1.0);
        let m = 7.0 / 3.0;
        assert_abs_diff_eq!(r2(&[m; 3], &t).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(r2(&[1.0, 2.0], &[2.0, 2.0]), Err(Error::UndefinedMetric(_))));
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0, 1.0]), vec![4.0, 1.5, 3.0, 1.5]);
    }

    #[test]
    fn spearman_examples() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap(), -1.0, epsilon = 1e-15);
        // Ranks (1.5, 1.5, 3) vs (1, 2, 3): covariance 1.5, variances 1.5 and 2.
        let expected = 1.5 / (1.5f64 * 2.0).sqrt();
        assert_abs_diff_eq!(spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), expected, epsilon = 1e-15);
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0; 4], &[1.0; 3]).unwrap(), 0.5);
        // Pairs (pos, neg): 1.5>1, 1.5<2, 3>1, 3>2.
        assert_eq!(auroc(&[1.0, 2.0], &[1.5, 3.0]).unwrap(), 0.75);
        assert!(auroc(&[], &[1.0]).is_err());
    }

    #[test]
    fn ece_examples() {
        let probs = Array2::from_shape_fn((10, 2), |(_, j)| if j == 0 { 0.8 } else { 0.2 });
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 8)).collect();
        let r = ece(probs.view(), &labels, DEFAULT_ECE_BINS).unwrap();
        assert_abs_diff_eq!(r.ece, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.accuracy, 0.8, epsilon = 1e-12);

        let sure = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let r = ece(sure.view(), &[0, 1, 1, 0], 15).unwrap();
        assert_abs_diff_eq!(r.ece, 0.5, epsilon = 1e-12);

        let half = array![[0.5, 0.5]];
        let r = ece(half.view(), &[1], 15).unwrap();
        assert_abs_diff_eq!(r.nll, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.brier, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bins.iter().map(|b| b.weight).sum::<f64>(), 1.0, epsilon = 1e-12);

        assert!(ece(half.view(), &[2], 15).is_err());
        assert!(ece(array![[0.7, 0.7]].view(), &[0], 15).is_err());
    }

    #[test]
    fn nll_uses_floor() {
        let r = ece(array![[1.0, 0.0]].view(), &[1], 15).unwrap();
        assert_abs_diff_eq!(r.nll, -NLL_PROBABILITY_FLOOR.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.brier, 2.0, epsilon = 1e-15);
    }

    fn distinct(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::hash_set(-1_000_000i64..1_000_000, n).prop_map(|s| s.into_iter().map(|v| v as f64 / 7.0).collect())
    }

    proptest! {
        #[test]
        fn spearman_ignores_monotone_transforms(a in proptest::collection::vec(-50.0..50.0f64, 3..40), seed in 0u64..1000) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.3 + ((i as u64 * 7919 + seed) % 13) as f64).collect();
            if let Ok(base) = spearman(&a, &b) {
                let ta: Vec<f64> = a.iter().map(|v| (v / 10.0).exp()).collect();
                let tb: Vec<f64> = b.iter().map(|v| v.powi(3) + 2.0 * v).collect();
                prop_assert!((spearman(&ta, &tb).unwrap() - base).abs() < 1e-12);
            }
        }

        #[test]
        fn auroc_is_antisymmetric(scores in distinct(30), split in 1usize..29) {
            let (neg, pos) = scores.split_at(split);
            prop_assert!((auroc(neg, pos).unwrap() + auroc(pos, neg).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auroc_matches_pair_count(neg in proptest::collection::vec(0u8..6, 1..15), pos in proptest::collection::vec(0u8..6, 1..15)) {
            let (neg, pos): (Vec<f64>, Vec<f64>) = (neg.iter().map(|&v| f64::from(v)).collect(), pos.iter().map(|&v| f64::from(v)).collect());
            let mut wins = 0.0;
            for p in &pos {
                for n in &neg {
                    wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
                }
            }
            let brute = wins / (pos.len() * neg.len()) as f64;
            prop_assert!((auroc(&neg, &pos).unwrap() - brute).abs() < 1e-12);
        }

        #[test]
        fn metrics_are_permutation_invariant(v in proptest::collection::vec((0.0..1.0f64, 0usize..3, -5.0..5.0f64), 4..40), shift in 1usize..39) {
            let k = shift % v.len();
            let mut rotated = v.clone();
            rotated.rotate_left(k);
            let probs = |rows: &[(f64, usize, f64)]| Array2::from_shape_fn((rows.len(), 3), |(i, j)| {
                let p = rows[i].0;
                [p, (1.0 - p) * 0.25, (1.0 - p) * 0.75][j]
            });
            let labels = |rows: &[(f64, usize, f64)]| rows.iter().map(|r| r.1).collect::<Vec<_>>();
            let a = ece(probs(&v).view(), &labels(&v), 15).unwrap();
            let b = ece(probs(&rotated).view(), &labels(&rotated), 15).unwrap();
            prop_assert!((a.ece - b.ece).abs() < 1e-12);
            prop_assert!((a.nll - b.nll).abs() < 1e-12);
            prop_assert!((a.brier - b.brier).abs() < 1e-12);
            prop_assert!((0.0..=2.0).contains(&a.brier) && a.nll >= 0.0 && (0.0..=1.0).contains(&a.ece));
            let x: Vec<f64> = v.iter().map(|r| r.2).collect();
            let y: Vec<f64> = v.iter().map(|r| r.0).collect();
            let xr: Vec<f64> = rotated.iter().map(|r| r.2).collect();
            let yr: Vec<f64> = rotated.iter().map(|r| r.0).collect();
            prop_assert!((mae(&x, &y).unwrap() - mae(&xr, &yr).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ece_vanishes_when_calibrated(conf_steps in proptest::collection::vec(1usize..10, 1..6)) {
            // Each group: 10 rows at confidence c = k/10 with exactly k correct.
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for &k in &conf_steps {
                let c = 0.5 + k as f64 / 20.0;
                let correct = (c * 20.0).round() as usize;
                for i in 0..20 {
                    rows.push([c, 1.0 - c]);
                    labels.push(usize::from(i >= correct));
                }
            }
            let probs = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
            let r = ece(probs.view(), &labels, 15).unwrap();
            prop_assert!(r.ece < 1e-12, "ece {}", r.ece);
        }
    }
}
