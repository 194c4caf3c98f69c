//! CART regression trees and bagged forests.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Anchors paired with each training sample (`A`).
    pub anchor_replication: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 5,
            max_depth: None,
            min_samples_split: 2,
            anchor_replication: 5,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if self.anchor_replication == 0 {
            return Err(Error::invalid("anchor replication must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { value: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Mean of rows that is exact when every row is identical.
fn stable_mean<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Vec<f64> {
    let mut mean = vec![0.0; width];
    for (i, row) in rows.enumerate() {
        let n = (i + 1) as f64;
        for (m, v) in mean.iter_mut().zip(row) {
            *m += (v - *m) / n;
        }
    }
    mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

struct Builder<'x, 'y> {
    x: ArrayView2<'x, f64>,
    y: ArrayView2<'y, f64>,
    max_depth: usize,
    min_split: usize,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let value = stable_mean(idx.iter().map(|&i| self.y.row(i).to_slice().expect("standard layout")), self.y.ncols());
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let first = self.y.row(idx[0]);
        let pure = idx.iter().all(|&i| self.y.row(i) == first);
        if pure || idx.len() < self.min_split || depth >= self.max_depth {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let mid = partition(idx, |i| self.x[[i, feature]] <= threshold);
        if mid == 0 || mid == idx.len() {
            return self.leaf(idx);
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    /// Maximizes Σ_out (ΣL)²/nL + (ΣR)²/nR, i.e. minimizes the summed SSE.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let k = self.y.ncols();
        let m = idx.len();
        let mut total = vec![0.0; k];
        for &i in idx {
            for (t, v) in total.iter_mut().zip(self.y.row(i)) {
                *t += v;
            }
        }
        let parent: f64 = total.iter().map(|s| s * s).sum::<f64>() / m as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        let mut left = vec![0.0; k];
        for f in 0..self.x.ncols() {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            left.iter_mut().for_each(|v| *v = 0.0);
            for pos in 0..m - 1 {
                let i = order[pos];
                for (l, v) in left.iter_mut().zip(self.y.row(i)) {
                    *l += v;
                }
                let (lo, hi) = (self.x[[i, f]], self.x[[order[pos + 1], f]]);
                if lo >= hi {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = (m - pos - 1) as f64;
                let score: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(l, t)| l * l / nl + (t - l) * (t - l) / nr)
                    .sum();
                if best.is_none_or(|(s, _, _)| score > s) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, f, threshold));
                }
            }
        }
        best.filter(|(s, _, _)| *s > parent * (1.0 + 1e-12) + 1e-12)
            .map(|(_, f, t)| (f, t))
    }
}

/// Stable-enough in-place partition; returns the count satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for j in 0..idx.len() {
        if pred(idx[j]) {
            idx.swap(mid, j);
            mid += 1;
        }
    }
    mid
}

impl RegressionTree {
    /// Fits on the rows listed in `idx` (duplicates allowed, as in a bootstrap).
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        idx: &[usize],
        max_depth: Option<usize>,
        min_samples_split: usize,
    ) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::Empty("tree training rows".into()));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::dims("tree targets", x.nrows(), y.nrows()));
        }
        let y = y.as_standard_layout();
        let mut b = Builder {
            x,
            y: y.view(),
            max_depth: max_depth.unwrap_or(usize::MAX),
            min_split: min_samples_split.max(2),
            nodes: Vec::new(),
        };
        let mut idx = idx.to_vec();
        b.build(&mut idx, 0);
        Ok(RegressionTree {
            nodes: b.nodes,
            n_features: x.ncols(),
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged regression trees; predictions average the trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    n_features: usize,
    n_outputs: usize,
}

impl Forest {
    /// Each tree sees a bootstrap resample drawn from its own seed stream.
    pub fn fit(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &ForestConfig) -> Result<Self> {
        cfg.validate()?;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::invalid(format!("a forest needs at least 2 rows, got {n}")));
        }
        let trees = (0..cfg.n_trees)
            .map(|t| {
                let mut rng = seeded(derive_seed(cfg.seed, t as u64));
                let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                RegressionTree::fit(x, y, &sample, cfg.max_depth, cfg.min_samples_split)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            trees,
            n_features: x.ncols(),
            n_outputs: y.ncols(),
        })
    }

    pub fn from_trees(trees: Vec<RegressionTree>, n_outputs: usize) -> Result<Self> {
        let n_features = trees.first().ok_or_else(|| Error::Empty("tree list".into()))?.n_features;
        Ok(Forest {
            trees,
            n_features,
            n_outputs,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_outputs));
        let mut buf = Vec::with_capacity(self.n_features);
        for (mut o, row) in out.rows_mut().into_iter().zip(x.rows()) {
            buf.clear();
            buf.extend(row.iter().copied());
            let mean = stable_mean(self.trees.iter().map(|t| t.predict_row(&buf)), self.n_outputs);
            for (dst, v) in o.iter_mut().zip(mean) {
                *dst = v;
            }
        }
        out
    }
}
