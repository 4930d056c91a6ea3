//! Random-Forest regression surrogate over (design, score) data.
//!
//! CART variance-reduction trees with bootstrap resampling and
//! per-split feature subsampling. Missing feature values (NaN sentinel,
//! used for inactive conditional parameters) route left at every split,
//! so partial design points remain predictable and explainable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Sentinel for absent feature values (inactive conditional parameters).
pub const MISSING: f64 = f64::NAN;

pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Row-major training data with column names and group tags.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Rows = trials, columns = encoded parameters; NaN = missing.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub columns: Vec<String>,
    /// Group tag per column (importance aggregation key).
    pub groups: Vec<String>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::Model("row/score count mismatch".into()));
        }
        let width = self.columns.len();
        if self.groups.len() != width {
            return Err(Error::Model("one group tag per column required".into()));
        }
        if self.x.iter().any(|r| r.len() != width) {
            return Err(Error::Model("ragged feature matrix".into()));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("scores must be finite".into()));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.x.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// None = grow until purity / min_leaf.
    pub max_depth: Option<usize>,
    /// Minimum samples per leaf.
    pub min_leaf: usize,
    /// Fraction of features considered per split.
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            max_depth: None,
            min_leaf: 2,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 || self.min_leaf < 1 {
            return Err(Error::Model("n_trees and min_leaf must be at least 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::Model("feature_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One node of a regression tree; `feature == None` marks a leaf.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Training samples that reached this node.
    pub count: usize,
    /// Mean target of those samples (leaf prediction; internal-node
    /// expectation for Shapley weighting).
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Tree {
    /// Nodes in preorder; index 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.feature {
                None => return node.value,
                Some(f) => {
                    // Missing routes left, as does x ≤ threshold.
                    i = if is_missing(x[f]) || x[f] <= node.threshold {
                        node.left
                    } else {
                        node.right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionForest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub config: ForestConfig,
}

impl RegressionForest {
    /// Mean of per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Model(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Mean of per-tree root expectations (the model's baseline output).
    pub fn base_value(&self) -> f64 {
        self.trees.iter().map(|t| t.nodes[0].value).sum::<f64>() / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    min_leaf: usize,
    max_depth: Option<usize>,
    n_split_features: usize,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    /// Builds one node from `rows` (bootstrap indices) and returns its
    /// index.
    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| self.data.y[r]).sum::<f64>() / n;
        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            count: rows.len(),
            value: mean,
        });
        let depth_ok = self.max_depth.map(|d| depth < d).unwrap_or(true);
        if rows.len() < 2 * self.min_leaf || !depth_ok {
            return idx;
        }
        let sse: f64 = rows.iter().map(|&r| (self.data.y[r] - mean).powi(2)).sum();
        if sse <= 1e-24 {
            return idx;
        }
        let Some((feature, threshold)) = self.best_split(rows, rng) else {
            return idx;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
            let v = self.data.x[r][feature];
            is_missing(v) || v <= threshold
        });
        let left = self.grow(&left_rows, depth + 1, rng);
        let right = self.grow(&right_rows, depth + 1, rng);
        let node = &mut self.nodes[idx];
        node.feature = Some(feature);
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        idx
    }

    /// Best (feature, threshold) by SSE reduction over a random feature
    /// subset; missing values always join the left partition.
    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let m = self.data.n_features();
        // Sample features without replacement (partial Fisher-Yates).
        let mut features: Vec<usize> = (0..m).collect();
        for i in 0..self.n_split_features.min(m) {
            let j = rng.gen_range(i..m);
            features.swap(i, j);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features[..self.n_split_features.min(m)] {
            // Missing rows are pinned to the left side.
            let mut present: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
            let mut miss_sum = 0.0;
            let mut miss_n = 0usize;
            for &r in rows {
                let v = self.data.x[r][f];
                if is_missing(v) {
                    miss_sum += self.data.y[r];
                    miss_n += 1;
                } else {
                    present.push((v, self.data.y[r]));
                }
            }
            if present.len() < 2 {
                continue;
            }
            present.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let total_sum: f64 = miss_sum + present.iter().map(|p| p.1).sum::<f64>();
            let total_n = rows.len();
            let mut left_sum = miss_sum;
            let mut left_n = miss_n;
            for k in 0..present.len() - 1 {
                left_sum += present[k].1;
                left_n += 1;
                if present[k].0 == present[k + 1].0 {
                    continue; // threshold must separate distinct values
                }
                let right_n = total_n - left_n;
                if left_n < self.min_leaf || right_n < self.min_leaf {
                    continue;
                }
                // SSE reduction = Σy² − Σ_child (Σy_child)²/n_child; the
                // Σy² term is shared, so maximize the child square sums.
                let right_sum = total_sum - left_sum;
                let gain = left_sum * left_sum / left_n as f64
                    + right_sum * right_sum / right_n as f64
                    - total_sum * total_sum / total_n as f64;
                if gain > 1e-12 && best.as_ref().map(|b| gain > b.0).unwrap_or(true) {
                    let threshold = 0.5 * (present[k].0 + present[k + 1].0);
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Fits a forest of CART variance-reduction trees; deterministic given
/// the seed.
pub fn fit_forest(data: &Dataset, config: &ForestConfig, seed: u64) -> Result<RegressionForest> {
    data.validate()?;
    config.validate()?;
    if data.n_rows() < 2 {
        return Err(Error::Model("at least 2 rows required to fit a forest".into()));
    }
    let m = data.n_features();
    let n_split_features = ((m as f64 * config.feature_fraction).ceil() as usize).clamp(1, m);
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (t as u64 + 1).wrapping_mul(0xA076_1D64_78BD_642F));
        let rows: Vec<usize> = if config.bootstrap {
            (0..data.n_rows()).map(|_| rng.gen_range(0..data.n_rows())).collect()
        } else {
            (0..data.n_rows()).collect()
        };
        let mut builder = TreeBuilder {
            data,
            min_leaf: config.min_leaf,
            max_depth: config.max_depth,
            n_split_features,
            nodes: Vec::new(),
        };
        builder.grow(&rows, 0, &mut rng);
        trees.push(Tree { nodes: builder.nodes });
    }
    Ok(RegressionForest { trees, n_features: m, config: config.clone() })
}
