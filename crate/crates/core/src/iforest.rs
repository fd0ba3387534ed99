//! Isolation forest anomaly scoring.
//!
//! Each tree is grown on a subsample of at most ψ rows by choosing a random
//! non-constant dimension and a split value drawn uniformly from the open
//! interval between that dimension's minimum and maximum. A sample's score is
//! `2^(−E[h(x)] / c(ψ))`, where `h` is the isolation depth plus the expected
//! depth of the subtree left unbuilt at the leaf, and `c` is [`avg_path_norm`].
//! Shorter paths give scores nearer 1.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_without_replacement, FeatureMatrix};
use crate::seed;
use crate::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Average path length of an unsuccessful binary search tree lookup over `n`
/// points. Used both as the score normalizer and as the leaf adjustment.
pub fn avg_path_norm(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub subsample_size: usize,
    pub contamination: f64,
    /// `None` means `ceil(log2 ψ)` for the effective subsample size ψ.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 100,
            subsample_size: 256,
            contamination: 0.1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Config("forest.n_estimators must be at least 1".into()));
        }
        if self.subsample_size < 2 {
            return Err(Error::Config("forest.subsample_size must be at least 2".into()));
        }
        if !(self.contamination > 0.0 && self.contamination <= 0.5) {
            return Err(Error::Config(format!(
                "forest.contamination must be in (0, 0.5], got {}",
                self.contamination
            )));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("forest.max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// `ceil(log2 n)` for `n ≥ 1`.
pub fn auto_max_depth(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        size: usize,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Node::Leaf { size } => out.push(*size),
            Node::Split { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IsoTree {
    root: Node,
}

impl IsoTree {
    pub fn from_root(root: Node) -> Self {
        IsoTree { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Leaf sizes in left-to-right order.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Number of edges from the root to the leaf reached by `x`.
    pub fn isolation_depth(&self, x: &[f32]) -> (usize, usize) {
        let mut node = &self.root;
        let mut edges = 0;
        loop {
            match node {
                Node::Leaf { size } => return (edges, *size),
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    node = if f64::from(x[*dim]) < *value { left } else { right };
                    edges += 1;
                }
            }
        }
    }
}

/// Edges traversed to the leaf `x` reaches, plus `c(leaf size)`.
pub fn path_length(tree: &IsoTree, x: &[f32]) -> f64 {
    let (edges, size) = tree.isolation_depth(x);
    edges as f64 + avg_path_norm(size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    config: ForestConfig,
    feature_dim: usize,
    /// Effective subsample size, `min(ψ, n)`.
    psi: usize,
    c_psi: f64,
    max_depth: usize,
    trees: Vec<IsoTree>,
}

struct TreeBuilder<'a> {
    x: &'a FeatureMatrix,
    max_depth: usize,
    rng: seed::Rng,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> Node {
        if depth >= self.max_depth || rows.len() <= 1 {
            return Node::Leaf { size: rows.len() };
        }
        let Some((dim, lo, hi)) = self.pick_dimension(rows) else {
            return Node::Leaf { size: rows.len() };
        };
        let value = loop {
            let v = self.rng.random_range(lo..hi);
            if v > lo {
                break v;
            }
        };
        let mut mid = 0;
        for i in 0..rows.len() {
            if f64::from(self.x.row(rows[i])[dim]) < value {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        let left = Box::new(self.grow(l, depth + 1));
        let right = Box::new(self.grow(r, depth + 1));
        Node::Split {
            dim,
            value,
            left,
            right,
        }
    }

    fn range(&self, rows: &[usize], dim: usize) -> (f64, f64) {
        rows.iter()
            .map(|&r| f64::from(self.x.row(r)[dim]))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Uniform over dimensions that are not constant on `rows`. Tries up to
    /// `d` random draws, then falls back to scanning every dimension.
    fn pick_dimension(&mut self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let d = self.x.d();
        for _ in 0..d {
            let dim = self.rng.random_range(0..d);
            let (lo, hi) = self.range(rows, dim);
            if lo < hi {
                return Some((dim, lo, hi));
            }
        }
        let candidates: Vec<(usize, f64, f64)> = (0..d)
            .map(|dim| {
                let (lo, hi) = self.range(rows, dim);
                (dim, lo, hi)
            })
            .filter(|(_, lo, hi)| lo < hi)
            .collect();
        if candidates.is_empty() {
            None
        } else {
            Some(candidates[self.rng.random_range(0..candidates.len())])
        }
    }
}

/// Fits a forest on `x`, normally the positive-labeled features.
///
/// Tree `t` draws its randomness from `seed::derive(config.seed, "tree", t)`,
/// so the result does not depend on how many threads build it.
pub fn fit_forest(config: &ForestConfig, x: &FeatureMatrix) -> Result<IsolationForest> {
    config.validate()?;
    if x.n() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: x.n(),
        });
    }
    let psi = config.subsample_size.min(x.n());
    let max_depth = config.max_depth.unwrap_or_else(|| auto_max_depth(psi));
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::derived_rng(config.seed, "tree", t as u64);
            let mut rows = sample_without_replacement(x.n(), psi, &mut rng);
            let mut builder = TreeBuilder { x, max_depth, rng };
            IsoTree {
                root: builder.grow(&mut rows, 0),
            }
        })
        .collect();
    Ok(IsolationForest {
        config: config.clone(),
        feature_dim: x.d(),
        psi,
        c_psi: avg_path_norm(psi),
        max_depth,
        trees,
    })
}

impl IsolationForest {
    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[IsoTree] {
        &self.trees
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn subsample_size(&self) -> usize {
        self.psi
    }

    pub fn c_psi(&self) -> f64 {
        self.c_psi
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn check(&self, x: &[f32]) -> Result<()> {
        if x.len() == self.feature_dim {
            Ok(())
        } else {
            Err(Error::Dimension {
                row: None,
                expected: self.feature_dim,
                actual: x.len(),
            })
        }
    }

    /// Mean of [`path_length`] over all trees.
    pub fn mean_path_length(&self, x: &[f32]) -> Result<f64> {
        self.check(x)?;
        let total: f64 = self.trees.iter().map(|t| path_length(t, x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let forest: IsolationForest = serde_json::from_str(text)?;
        if forest.trees.is_empty() || forest.feature_dim == 0 {
            return Err(Error::format(None, "forest has no trees or zero dimension"));
        }
        if forest.c_psi.to_bits() != avg_path_norm(forest.psi).to_bits() {
            return Err(Error::format(None, "c_psi does not match subsample size"));
        }
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Converts a mean path length into a score in (0, 1].
pub fn score_from_mean_path(mean_path: f64, c_psi: f64) -> f64 {
    (-mean_path / c_psi).exp2()
}

pub fn anomaly_score(forest: &IsolationForest, x: &[f32]) -> Result<f64> {
    let h = forest.mean_path_length(x)?;
    Ok(score_from_mean_path(h, forest.c_psi))
}

pub fn score_batch(forest: &IsolationForest, x: &FeatureMatrix) -> Result<Vec<f64>> {
    x.check_dim(forest.feature_dim)?;
    x.rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| anomaly_score(forest, row))
        .collect()
}

/// Nearest-rank `(1 − C)` quantile of `scores`: the value at 1-based
/// position `ceil((1 − C) · n)` in ascending order.
pub fn threshold_from_contamination(scores: &[f64], contamination: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::Argument(format!(
            "contamination must be in (0, 1), got {contamination}"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (((1.0 - contamination) * n as f64) - 1e-9).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Flags scores strictly above `threshold`.
pub fn flag_anomalies(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}
