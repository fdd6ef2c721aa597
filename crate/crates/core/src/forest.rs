//! Random-forest regressor with impurity importances.
//!
//! Trees are grown on bootstrap resamples with every feature considered at
//! every split, no depth limit and a minimum of two samples to split. Split
//! quality is the decrease in weighted squared error; candidate thresholds
//! are midpoints between consecutive distinct values.
//!
//! A bootstrap resample is represented by per-row draw counts, so a tree
//! never materialises duplicated rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::trace::{DesignMatrix, FeatureId, Sample};

/// Relative tolerance below which a split is not an improvement.
const SPLIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub seed: u64,
    /// When false every tree sees each row exactly once.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            seed: 0,
            bootstrap: true,
        }
    }
}

/// One node of a tree stored in a flat array; children are array indices.
///
/// `n_samples` counts bootstrap draws, so duplicated rows count repeatedly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        prediction: f64,
        n_samples: usize,
    },
    Split {
        /// Column position in the training matrix.
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Weighted target variance at the node.
        impurity: f64,
    },
}

impl TreeNode {
    pub fn n_samples(&self) -> usize {
        match *self {
            TreeNode::Leaf { n_samples, .. } | TreeNode::Split { n_samples, .. } => n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(prediction: f64, n_samples: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf {
                prediction,
                n_samples,
            }],
        }
    }

    /// Builds a tree from nodes with the root at position 0.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidConfig("tree has no nodes".into()));
        }
        for node in &nodes {
            if let TreeNode::Split { left, right, .. } = *node {
                if left >= nodes.len() || right >= nodes.len() || left == 0 || right == 0 {
                    return Err(Error::InvalidConfig("child index out of range".into()));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Position of the leaf reached by `x`; values `<= threshold` go left.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { .. } => return at,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { prediction, .. } => prediction,
            TreeNode::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    trees: Vec<Tree>,
    feature_ids: Vec<FeatureId>,
    config: ForestConfig,
    importances: Vec<f64>,
}

impl RegressionForest {
    pub fn fit(matrix: &DesignMatrix, config: &ForestConfig) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::InvalidConfig("forest needs at least one tree".into()));
        }
        let m = matrix.n_samples();
        if !matrix.has_targets() {
            return Err(Error::MissingTargets);
        }
        if m < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                available: m,
            });
        }
        let y = matrix.targets().ok_or(Error::MissingTargets)?;
        let grower = Grower::new(matrix.columns(), y);
        let n = matrix.n_features();

        let mut trees = Vec::with_capacity(config.n_trees);
        let mut importances = vec![0.0; n];
        for tree_index in 0..config.n_trees {
            let counts = if config.bootstrap {
                bootstrap_counts(m, config.seed, tree_index)
            } else {
                vec![1; m]
            };
            let (tree, gains) = grower.grow(&counts);
            let total: f64 = gains.iter().sum();
            if total > 0.0 {
                for (acc, g) in importances.iter_mut().zip(&gains) {
                    *acc += g / total;
                }
            }
            trees.push(tree);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            for v in &mut importances {
                *v /= total;
            }
        }
        Ok(Self {
            trees,
            feature_ids: matrix.feature_ids().to_vec(),
            config: *config,
            importances,
        })
    }

    /// Assembles a forest from prebuilt trees. Importances are all zero.
    pub fn from_trees(trees: Vec<Tree>, feature_ids: Vec<FeatureId>, seed: u64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidConfig("forest needs at least one tree".into()));
        }
        let n = feature_ids.len();
        Ok(Self {
            config: ForestConfig {
                n_trees: trees.len(),
                seed,
                bootstrap: false,
            },
            trees,
            feature_ids,
            importances: vec![0.0; n],
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn feature_ids(&self) -> &[FeatureId] {
        &self.feature_ids
    }

    /// Per-feature importances aligned with the training columns.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_ids.len(),
                found: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict(&self, sample: &Sample) -> Result<f64> {
        self.predict_row(&sample.values)
    }

    /// Predictions for every row of a matrix with the training features.
    pub fn predict_matrix(&self, matrix: &DesignMatrix) -> Result<Vec<f64>> {
        if matrix.n_features() != self.feature_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_ids.len(),
                found: matrix.n_features(),
            });
        }
        (0..matrix.n_samples())
            .map(|i| self.predict_row(&matrix.row(i)))
            .collect()
    }
}

/// Draw counts of an `n_rows`-out-of-`n_rows` bootstrap for one tree.
pub fn bootstrap_counts(n_rows: usize, seed: u64, tree_index: usize) -> Vec<u32> {
    let mut rng = seed::rng(seed, tree_index as u64);
    let mut counts = vec![0u32; n_rows];
    for _ in 0..n_rows {
        counts[rng.random_range(0..n_rows)] += 1;
    }
    counts
}

#[derive(Clone, Copy)]
struct Entry {
    value: f64,
    row: u32,
}

/// Shared, tree-independent state: every feature's rows presorted once.
struct Grower<'a> {
    y: &'a [f64],
    sorted: Vec<Vec<Entry>>,
}

impl<'a> Grower<'a> {
    fn new(columns: &[Vec<f64>], y: &'a [f64]) -> Self {
        let sorted = columns
            .iter()
            .map(|c| {
                let mut e: Vec<Entry> = c
                    .iter()
                    .enumerate()
                    .map(|(r, &value)| Entry {
                        value,
                        row: r as u32,
                    })
                    .collect();
                e.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.row.cmp(&b.row)));
                e
            })
            .collect();
        Self { y, sorted }
    }

    /// Grows one tree; returns it with per-feature squared-error decreases.
    fn grow(&self, counts: &[u32]) -> (Tree, Vec<f64>) {
        let m = self.y.len();
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let total_w: f64 = w.iter().sum();
        let mean = w.iter().zip(self.y).map(|(w, y)| w * y).sum::<f64>() / total_w;
        // centred targets keep the sums of squares well conditioned
        let yc: Vec<f64> = self.y.iter().map(|y| y - mean).collect();

        let mut members: Vec<u32> = (0..m as u32).filter(|&r| counts[r as usize] > 0).collect();
        let mut sorted: Vec<Vec<Entry>> = self
            .sorted
            .iter()
            .map(|s| s.iter().copied().filter(|e| counts[e.row as usize] > 0).collect())
            .collect();
        let mut gains = vec![0.0; sorted.len()];
        let mut goes_left = vec![false; m];
        let mut scratch_e: Vec<Entry> = Vec::with_capacity(members.len());
        let mut scratch_r: Vec<u32> = Vec::with_capacity(members.len());

        let mut nodes = vec![TreeNode::Leaf {
            prediction: 0.0,
            n_samples: 0,
        }];
        let mut stack = vec![(0usize, 0usize, members.len())];
        while let Some((id, lo, hi)) = stack.pop() {
            let rows = &members[lo..hi];
            let (mut sw, mut swy, mut sy) = (0.0, 0.0, 0.0);
            let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows {
                let r = r as usize;
                sw += w[r];
                swy += w[r] * yc[r];
                sy += w[r] * self.y[r];
                ymin = ymin.min(self.y[r]);
                ymax = ymax.max(self.y[r]);
            }
            let node_mean = swy / sw;
            let sse: f64 = rows
                .iter()
                .map(|&r| {
                    let d = yc[r as usize] - node_mean;
                    w[r as usize] * d * d
                })
                .sum();
            let leaf = TreeNode::Leaf {
                prediction: sy / sw,
                n_samples: sw as usize,
            };
            if sw < 2.0 || ymin == ymax {
                nodes[id] = leaf;
                continue;
            }

            let base = swy * swy / sw;
            let tol = SPLIT_TOLERANCE * sse;
            let mut best: Option<(usize, usize, f64)> = None;
            let mut best_proxy = base + tol;
            for (f, entries) in sorted.iter().enumerate() {
                let seg = &entries[lo..hi];
                let (mut wl, mut sl) = (0.0, 0.0);
                for i in 0..seg.len() - 1 {
                    let r = seg[i].row as usize;
                    wl += w[r];
                    sl += w[r] * yc[r];
                    let (v, next) = (seg[i].value, seg[i + 1].value);
                    if v < next {
                        let wr = sw - wl;
                        let sr = swy - sl;
                        let proxy = sl * sl / wl + sr * sr / wr;
                        if proxy > best_proxy {
                            best_proxy = proxy;
                            let mid = 0.5 * (v + next);
                            let threshold = if mid < next { mid } else { v };
                            best = Some((f, i + 1, threshold));
                        }
                    }
                }
            }
            let Some((feature, n_left, threshold)) = best else {
                nodes[id] = leaf;
                continue;
            };
            gains[feature] += (best_proxy - base).max(0.0);

            for e in &sorted[feature][lo..lo + n_left] {
                goes_left[e.row as usize] = true;
            }
            for entries in sorted.iter_mut() {
                stable_partition(&mut entries[lo..hi], &mut scratch_e, |e| {
                    goes_left[e.row as usize]
                });
            }
            stable_partition(&mut members[lo..hi], &mut scratch_r, |&r| goes_left[r as usize]);
            for &r in &members[lo..lo + n_left] {
                goes_left[r as usize] = false;
            }

            let left = nodes.len();
            let right = left + 1;
            nodes.push(leaf.clone());
            nodes.push(leaf);
            nodes[id] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                n_samples: sw as usize,
                impurity: sse / sw,
            };
            stack.push((right, lo + n_left, hi));
            stack.push((left, lo, lo + n_left));
        }
        (Tree { nodes }, gains)
    }
}

fn stable_partition<T: Copy>(items: &mut [T], scratch: &mut Vec<T>, left: impl Fn(&T) -> bool) {
    scratch.clear();
    let mut write = 0;
    for i in 0..items.len() {
        let item = items[i];
        if left(&item) {
            items[write] = item;
            write += 1;
        } else {
            scratch.push(item);
        }
    }
    items[write..].copy_from_slice(scratch);
}
