//! Gradient-boosted regression trees for squared-error loss.
//!
//! Each tree is grown greedily to `max_depth` over an optional row and
//! column subsample. Leaf values follow the second-order boosting rule
//! `-soft(G, alpha) / (H + lambda)` and are scaled by the learning rate.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{check_weights, Regressor};
use crate::error::{arg, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    /// Minimum hessian (weight) sum in each child of a split.
    pub min_child_weight: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_estimators: 10,
            max_depth: 6,
            learning_rate: 0.3,
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            min_child_weight: 0.0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 {
            return arg("gbdt: n_estimators and max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return arg(format!("gbdt: learning_rate must lie in (0, 1], got {}", self.learning_rate));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample_bytree", self.colsample_bytree)] {
            if !(v > 0.0 && v <= 1.0) {
                return arg(format!("gbdt: {name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.reg_alpha >= 0.0 && self.reg_lambda >= 0.0 && self.min_child_weight >= 0.0) {
            return arg("gbdt: regularization terms must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    /// (feature, threshold) of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    n_features: usize,
}

impl GbdtModel {
    /// Prediction using only the first `n_trees` trees.
    pub fn predict_truncated(&self, x: ArrayView2<f64>, n_trees: usize) -> Vec<f64> {
        x.outer_iter()
            .map(|r| {
                self.base_score + self.trees[..n_trees.min(self.trees.len())].iter().map(|t| t.predict_row(|j| r[j])).sum::<f64>()
            })
            .collect()
    }

    /// Human-readable listing of the tree splits.
    pub fn summary(&self) -> String {
        let mut s = format!("gbdt base_score={} trees={}\n", self.base_score, self.trees.len());
        for (k, t) in self.trees.iter().enumerate() {
            s.push_str(&format!("tree {k}:"));
            for n in &t.nodes {
                match n {
                    Node::Leaf(v) => s.push_str(&format!(" leaf({v:.6})")),
                    Node::Split { feature, threshold, .. } => s.push_str(&format!(" x{feature}<={threshold:.6}")),
                }
            }
            s.push('\n');
        }
        s
    }
}

impl Regressor for GbdtModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        assert_eq!(x.ncols(), self.n_features, "feature dimension mismatch");
        self.predict_truncated(x, self.trees.len())
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    grad: &'a [f64],
    hess: &'a [f64],
    features: Vec<usize>,
    cfg: &'a GbtConfig,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let s = soft_threshold(g, self.cfg.reg_alpha);
        if h + self.cfg.reg_lambda <= 0.0 {
            0.0
        } else {
            s * s / (h + self.cfg.reg_lambda)
        }
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.cfg.reg_lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -soft_threshold(g, self.cfg.reg_alpha) / denom * self.cfg.learning_rate
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(g, h)));
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return id;
        }
        let parent = self.score(g, h);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for &f in &self.features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (self.x[[i, f]], self.grad[i], self.hess[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                gl += sorted[k].1;
                hl += sorted[k].2;
                let (a, b) = (sorted[k].0, sorted[k + 1].0);
                if a == b {
                    continue;
                }
                let hr = h - hl;
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(g - gl, hr) - parent;
                if gain > 1e-14 * parent.abs().max(1e-300) && best.is_none_or(|(bg, _, _)| gain > bg) {
                    let mut thr = a + (b - a) / 2.0;
                    if thr >= b {
                        thr = a;
                    }
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let split = partition(rows, |i| self.x[[i, feature]] <= threshold);
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Stable partition: rows satisfying `pred` first. Returns the split point.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| pred(i));
    let k = yes.len();
    rows[..k].copy_from_slice(&yes);
    rows[k..].copy_from_slice(&no);
    k
}

pub fn fit_gbdt(x: ArrayView2<f64>, y: &[f64], weights: Option<&[f64]>, cfg: &GbtConfig, seed: u64) -> Result<GbdtModel> {
    cfg.validate()?;
    let (n, d) = x.dim();
    if y.len() != n {
        return arg("gbdt: x and y lengths differ");
    }
    if n == 0 {
        return arg("gbdt: no training rows");
    }
    check_weights(n, weights)?;
    if y.iter().any(|v| !v.is_finite()) {
        return arg("gbdt: non-finite target");
    }
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; n], |w| w.to_vec());
    let wsum: f64 = w.iter().sum();
    if !(wsum > 0.0) {
        return arg("gbdt: total weight is zero");
    }
    let base_score = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let mut pred = vec![base_score; n];
    let mut rng = crate::rng::stream(seed, "gbdt");
    let n_rows = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((cfg.colsample_bytree * d as f64).round() as usize).clamp(1, d.max(1));
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut grad = vec![0.0; n];
    for _ in 0..cfg.n_estimators {
        for i in 0..n {
            grad[i] = w[i] * (pred[i] - y[i]);
        }
        let mut rows: Vec<usize> = if n_rows < n {
            let mut r = sample(&mut rng, n, n_rows).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let mut features: Vec<usize> = if n_cols < d {
            sample(&mut rng, d, n_cols).into_vec()
        } else {
            (0..d).collect()
        };
        features.sort_unstable();
        let mut grower = Grower {
            x,
            grad: &grad,
            hess: &w,
            features,
            cfg,
            nodes: Vec::new(),
        };
        grower.grow(&mut rows, 0);
        let tree = Tree { nodes: grower.nodes };
        for i in 0..n {
            pred[i] += tree.predict_row(|j| x[[i, j]]);
        }
        trees.push(tree);
    }
    Ok(GbdtModel {
        base_score,
        trees,
        n_features: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    fn mse(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
    }

    #[test]
    fn step_function_single_stump() {
        let mut r = crate::rng::stream(4, "x");
        let x = Array2::from_shape_fn((60, 2), |_| r.random::<f64>());
        let y: Vec<f64> = x.column(0).iter().map(|v| if *v > 0.5 { 1.0 } else { 0.0 }).collect();
        let cfg = GbtConfig {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            reg_lambda: 0.0,
            ..Default::default()
        };
        let m = fit_gbdt(x.view(), &y, None, &cfg, 0).unwrap();
        let (f, thr) = m.trees[0].root_split().unwrap();
        // Exhaustive oracle over all midpoints of feature 0.
        let lo = x.column(0).iter().copied().filter(|v| *v <= 0.5).fold(f64::MIN, f64::max);
        let hi = x.column(0).iter().copied().filter(|v| *v > 0.5).fold(f64::MAX, f64::min);
        assert_eq!(f, 0);
        assert!(thr > lo && thr <= hi, "{lo} {thr} {hi}");
        assert!(mse(&m.predict(x.view()), &y) <= 1e-12);
    }

    #[test]
    fn constant_target_predicts_constant() {
        let x = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 7 + j) % 5) as f64);
        let m = fit_gbdt(x.view(), &[0.1; 30], None, &GbtConfig::default(), 3).unwrap();
        assert!(m.predict(x.view()).iter().all(|p| (p - 0.1).abs() < 1e-12));
    }

    #[test]
    fn single_row() {
        let x = Array2::from_elem((1, 2), 0.5);
        let m = fit_gbdt(x.view(), &[2.0], None, &GbtConfig::default(), 1).unwrap();
        assert_eq!(m.predict(x.view()), vec![2.0]);
    }

    #[test]
    fn seeded_subsampling_is_deterministic() {
        let mut r = crate::rng::stream(5, "x");
        let x = Array2::from_shape_fn((80, 4), |_| r.random::<f64>());
        let y: Vec<f64> = x.outer_iter().map(|r| r[0] * r[1] + r[2]).collect();
        let cfg = GbtConfig {
            subsample: 0.7,
            colsample_bytree: 0.6,
            ..Default::default()
        };
        let a = fit_gbdt(x.view(), &y, None, &cfg, 9).unwrap();
        let b = fit_gbdt(x.view(), &y, None, &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn training_loss_non_increasing(seed in 0u64..1000, lr in 0.01f64..1.0, alpha in 0.0f64..1.0, lambda in 0.0f64..1.0) {
            let mut r = crate::rng::stream(seed, "x");
            let x = Array2::from_shape_fn((50, 3), |_| r.random::<f64>());
            let y: Vec<f64> = x.outer_iter().map(|row| (6.0 * row[0]).sin() + row[1] + 0.1 * r.random::<f64>()).collect();
            let cfg = GbtConfig { n_estimators: 8, max_depth: 3, learning_rate: lr, reg_alpha: alpha, reg_lambda: lambda, ..Default::default() };
            let m = fit_gbdt(x.view(), &y, None, &cfg, seed).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=8 {
                let l = mse(&m.predict_truncated(x.view(), k), &y);
                prop_assert!(l <= prev + 1e-12);
                prev = l;
            }
        }
    }
}
