//! CART decision trees with Gini impurity and a bootstrap random forest.
//!
//! Trees route `x[feature] <= threshold` to the left child. Candidate
//! thresholds are midpoints between consecutive distinct values present at
//! a node. Every tie resolves to the lower score, then the lower feature
//! index, then the lower threshold; vote ties resolve to class 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Classifier, Error, Result};

/// Serialized externally tagged (`{"leaf": {..}}`), which deserializes in a
/// single streaming pass however deep the tree is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: [u32; 2],
    },
    Internal {
        feature: usize,
        threshold: f64,
        /// Class counts of the samples that reached this node.
        counts: [u32; 2],
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn counts(&self) -> [u32; 2] {
        match self {
            TreeNode::Leaf { counts } | TreeNode::Internal { counts, .. } => *counts,
        }
    }

    fn leaf_for(&self, x: &[f64]) -> [u32; 2] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Leaf-majority class, ties to 0.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let [n0, n1] = self.leaf_for(x);
        u8::from(n1 > n0)
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Adds `(node share of root samples) * (impurity decrease)` per split
    /// feature into `acc`.
    fn accumulate_importance(&self, root_total: f64, acc: &mut [f64]) {
        if let TreeNode::Internal {
            feature,
            counts,
            left,
            right,
            ..
        } = self
        {
            let total = (counts[0] + counts[1]) as f64;
            let (lc, rc) = (left.counts(), right.counts());
            let child = weighted_gini(lc, rc);
            acc[*feature] += total / root_total * (gini(*counts) - child);
            left.accumulate_importance(root_total, acc);
            right.accumulate_importance(root_total, acc);
        }
    }
}

/// `1 - p0² - p1²`; zero for an empty node.
pub fn gini(counts: [u32; 2]) -> f64 {
    let total = (counts[0] + counts[1]) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / total;
    let p1 = counts[1] as f64 / total;
    1.0 - p0 * p0 - p1 * p1
}

/// Checked form of [`gini`] that rejects empty nodes.
pub fn try_gini(counts: [u32; 2]) -> Result<f64> {
    if counts[0] + counts[1] == 0 {
        return Err(Error::invalid("gini of an empty node"));
    }
    Ok(gini(counts))
}

/// Size-weighted mean of the child impurities.
pub fn weighted_gini(left: [u32; 2], right: [u32; 2]) -> f64 {
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    (nl * gini(left) + nr * gini(right)) / (nl + nr)
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = (lo + hi) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub weighted_gini: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: usize,
    pub seed: u64,
    /// Draw a bootstrap sample per tree; off fits every tree on all rows.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            // floor(sqrt(13))
            max_features: 3,
            seed: 42,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::param("n_trees", "must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::param("min_samples_split", "must be >= 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::param("min_samples_leaf", "must be >= 1"));
        }
        if self.max_features < 1 || self.max_features > n_features {
            return Err(Error::param(
                "max_features",
                format!("must lie in 1..={n_features}, got {}", self.max_features),
            ));
        }
        Ok(())
    }
}

/// Whether trees may be grown on the rayon pool. Results are identical
/// either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Rayon,
}

/// Column-major view of the training data plus per-column value ranks,
/// shared by every tree of a fit.
struct Columns<'a> {
    values: Vec<Vec<f64>>,
    /// `ranks[f][i]` orders row `i` among the distinct values of column `f`.
    ranks: Vec<Vec<u32>>,
    /// `distinct[f][rank]` is the column value with that rank.
    distinct: Vec<Vec<f64>>,
    labels: &'a [u8],
}

impl<'a> Columns<'a> {
    fn new(x: &[Vec<f64>], labels: &'a [u8]) -> Self {
        let width = x.first().map_or(0, |r| r.len());
        let values: Vec<Vec<f64>> = (0..width).map(|f| x.iter().map(|r| r[f]).collect()).collect();
        let (ranks, distinct) = values
            .iter()
            .map(|col| {
                let mut order: Vec<usize> = (0..col.len()).collect();
                order.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]));
                let mut ranks = vec![0u32; col.len()];
                let mut distinct = Vec::new();
                for &i in &order {
                    if distinct.last() != Some(&col[i]) {
                        distinct.push(col[i]);
                    }
                    ranks[i] = distinct.len() as u32 - 1;
                }
                (ranks, distinct)
            })
            .unzip();
        Columns {
            values,
            ranks,
            distinct,
            labels,
        }
    }

    fn width(&self) -> usize {
        self.values.len()
    }
}

/// Node-level split search over `rows` (distinct indices) with per-row
/// multiplicities in `weights`.
struct SplitSearch<'c, 'a> {
    cols: &'c Columns<'a>,
    weights: &'c [u32],
    min_samples_leaf: u32,
    buf: Vec<(u32, u32)>,
    hist: Vec<[u32; 2]>,
    bins: Vec<(u32, [u32; 2])>,
}

impl SplitSearch<'_, '_> {
    fn counts(&self, rows: &[u32]) -> [u32; 2] {
        let mut c = [0u32; 2];
        for &r in rows {
            c[self.cols.labels[r as usize] as usize] += self.weights[r as usize];
        }
        c
    }

    fn best(&mut self, rows: &[u32], parent: [u32; 2], features: &[usize]) -> Option<Split> {
        let total = parent[0] + parent[1];
        let mut best: Option<Split> = None;
        for &f in features {
            let ranks = &self.cols.ranks[f];
            let n_distinct = self.cols.distinct[f].len();
            // Per-rank class totals, by counting when the node is large
            // relative to the column's cardinality and by sorting otherwise.
            self.bins.clear();
            if rows.len() * 4 >= n_distinct {
                self.hist.clear();
                self.hist.resize(n_distinct, [0, 0]);
                for &r in rows {
                    let w = self.weights[r as usize];
                    self.hist[ranks[r as usize] as usize][self.cols.labels[r as usize] as usize] += w;
                }
                self.bins.extend(
                    self.hist
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c[0] + c[1] > 0)
                        .map(|(rank, &c)| (rank as u32, c)),
                );
            } else {
                self.buf.clear();
                self.buf.extend(rows.iter().map(|&r| (ranks[r as usize], r)));
                self.buf.sort_unstable_by_key(|&(rank, _)| rank);
                for &(rank, r) in &self.buf {
                    let mut c = [0u32; 2];
                    c[self.cols.labels[r as usize] as usize] = self.weights[r as usize];
                    match self.bins.last_mut() {
                        Some((last, acc)) if *last == rank => {
                            acc[0] += c[0];
                            acc[1] += c[1];
                        }
                        _ => self.bins.push((rank, c)),
                    }
                }
            }

            // Thresholds rise with rank, so within a feature only a strictly
            // lower score can win; across features the lower index wins ties.
            let mut left = [0u32; 2];
            for i in 0..self.bins.len().saturating_sub(1) {
                let c = self.bins[i].1;
                left[0] += c[0];
                left[1] += c[1];
                let n_left = left[0] + left[1];
                if n_left < self.min_samples_leaf || total - n_left < self.min_samples_leaf {
                    continue;
                }
                let score = weighted_gini(left, [parent[0] - left[0], parent[1] - left[1]]);
                let better = best.as_ref().map_or(true, |b| {
                    score < b.weighted_gini || (score == b.weighted_gini && f < b.feature)
                });
                if better {
                    let values = &self.cols.distinct[f];
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(
                            values[self.bins[i].0 as usize],
                            values[self.bins[i + 1].0 as usize],
                        ),
                        weighted_gini: score,
                    });
                }
            }
        }
        best.filter(|b| b.weighted_gini < gini(parent))
    }
}

/// Best Gini split of the samples `rows` (repeats allowed) over the
/// candidate columns, or `None` when nothing lowers impurity strictly or
/// every split leaves a child with fewer than `min_samples_leaf` samples.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[u8],
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<Split> {
    if rows.is_empty() {
        return None;
    }
    let cols = Columns::new(x, y);
    let mut weights = vec![0u32; y.len()];
    for &r in rows {
        weights[r] += 1;
    }
    let distinct: Vec<u32> = (0..y.len() as u32).filter(|&r| weights[r as usize] > 0).collect();
    let mut search = SplitSearch {
        cols: &cols,
        weights: &weights,
        min_samples_leaf: min_samples_leaf as u32,
        buf: Vec::new(),
        hist: Vec::new(),
        bins: Vec::new(),
    };
    let parent = search.counts(&distinct);
    search.best(&distinct, parent, features)
}

struct Grower<'c, 'a> {
    search: SplitSearch<'c, 'a>,
    config: &'c ForestConfig,
    rng: SplitMix64,
}

impl Grower<'_, '_> {
    /// Grows the subtree over `rows`, reordering the slice in place.
    fn grow(&mut self, rows: &mut [u32], depth: usize) -> Result<TreeNode> {
        let counts = self.search.counts(rows);
        let total = (counts[0] + counts[1]) as usize;
        let stop = counts[0] == 0
            || counts[1] == 0
            || self.config.max_depth.is_some_and(|d| depth >= d)
            || total < self.config.min_samples_split;
        if stop {
            return Ok(TreeNode::Leaf { counts });
        }
        let features = self
            .rng
            .sample_without_replacement(self.config.max_features, self.search.cols.width())?;
        let Some(split) = self.search.best(rows, counts, &features) else {
            return Ok(TreeNode::Leaf { counts });
        };
        let column = &self.search.cols.values[split.feature];
        let mut n_left = 0;
        for i in 0..rows.len() {
            if column[rows[i] as usize] <= split.threshold {
                rows.swap(i, n_left);
                n_left += 1;
            }
        }
        let (left, right) = rows.split_at_mut(n_left);
        let left = self.grow(left, depth + 1)?;
        let right = self.grow(right, depth + 1)?;
        Ok(TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            counts,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}

/// Bootstrap multiplicities drawn from a tree's generator: `n` draws of
/// `gen_below(n)`.
fn bootstrap_weights(rng: &mut SplitMix64, n: usize) -> Result<Vec<u32>> {
    let mut weights = vec![0u32; n];
    for _ in 0..n {
        weights[rng.gen_below(n as u64)? as usize] += 1;
    }
    Ok(weights)
}

/// Grows one tree from its own seed: bootstrap draws first, then feature
/// subsets in depth-first order (each node before its left subtree, the
/// left subtree before the right).
fn grow_tree(cols: &Columns, config: &ForestConfig, seed: u64) -> Result<TreeNode> {
    let n = cols.labels.len();
    let mut rng = SplitMix64::new(seed);
    let weights = if config.bootstrap {
        bootstrap_weights(&mut rng, n)?
    } else {
        vec![1; n]
    };
    let mut rows: Vec<u32> = (0..n as u32).filter(|&r| weights[r as usize] > 0).collect();
    let mut grower = Grower {
        search: SplitSearch {
            cols,
            weights: &weights,
            min_samples_leaf: config.min_samples_leaf as u32,
            buf: Vec::with_capacity(rows.len()),
            hist: Vec::new(),
            bins: Vec::new(),
        },
        config,
        rng,
    };
    grower.grow(&mut rows, 0)
}

/// Fits a single CART tree on every row (no bootstrap), drawing feature
/// subsets from `SplitMix64::new(seed)`.
pub fn fit_tree(config: &ForestConfig, x: &[Vec<f64>], y: &[u8], seed: u64) -> Result<TreeNode> {
    check_training_data(x, y)?;
    config.validate(x[0].len())?;
    let cols = Columns::new(x, y);
    let config = ForestConfig {
        bootstrap: false,
        ..config.clone()
    };
    grow_tree(&cols, &config, seed)
}

/// The bootstrap multiset tree `i` of a forest would draw, as sorted row
/// indices. Exposed for inspection of seed derivation.
pub fn bootstrap_sample(seed: u64, n_rows: usize) -> Result<Vec<usize>> {
    let weights = bootstrap_weights(&mut SplitMix64::new(seed), n_rows)?;
    Ok(weights
        .iter()
        .enumerate()
        .flat_map(|(i, &w)| std::iter::repeat(i).take(w as usize))
        .collect())
}

fn check_training_data(x: &[Vec<f64>], y: &[u8]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::data("cannot fit on an empty dataset"));
    }
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let width = x[0].len();
    if x.iter().any(|r| r.len() != width) {
        return Err(Error::shape("rows have differing widths"));
    }
    if x.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::data("feature matrix contains missing values"));
    }
    if let Some(&bad) = y.iter().find(|&&t| t > 1) {
        return Err(Error::data(format!("label {bad} is not binary")));
    }
    if y.len() > u32::MAX as usize {
        return Err(Error::data("too many rows"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
    pub per_tree_seeds: Vec<u64>,
    pub n_features: usize,
    /// Set when the training labels held a single class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl RandomForestModel {
    pub fn fit(config: &ForestConfig, x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        Self::fit_with(config, x, y, Parallelism::default())
    }

    /// Per-tree seeds are drawn sequentially from `SplitMix64::new(seed)`
    /// before any tree is grown, so the forest does not depend on
    /// `parallelism`.
    pub fn fit_with(
        config: &ForestConfig,
        x: &[Vec<f64>],
        y: &[u8],
        parallelism: Parallelism,
    ) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::data("random forest needs at least 2 rows"));
        }
        check_training_data(x, y)?;
        let n_features = x[0].len();
        config.validate(n_features)?;

        let mut master = SplitMix64::new(config.seed);
        let per_tree_seeds: Vec<u64> = (0..config.n_trees).map(|_| master.next_u64()).collect();
        let cols = Columns::new(x, y);
        let trees = match parallelism {
            Parallelism::Sequential => per_tree_seeds
                .iter()
                .map(|&s| grow_tree(&cols, config, s))
                .collect::<Result<Vec<_>>>()?,
            Parallelism::Rayon => per_tree_seeds
                .par_iter()
                .map(|&s| grow_tree(&cols, config, s))
                .collect::<Result<Vec<_>>>()?,
        };
        let ones = y.iter().filter(|&&t| t == 1).count();
        let warning = (ones == 0 || ones == y.len())
            .then(|| "training labels contain a single class".to_string());
        Ok(RandomForestModel {
            trees,
            config: config.clone(),
            per_tree_seeds,
            n_features,
            warning,
        })
    }

    /// The first `n_trees` trees. Seeds are drawn in sequence, so this
    /// equals a fresh fit with `n_trees` and otherwise the same config.
    pub fn truncated(&self, n_trees: usize) -> Result<Self> {
        if n_trees == 0 || n_trees > self.trees.len() {
            return Err(Error::param(
                "n_trees",
                format!("must lie in 1..={}, got {n_trees}", self.trees.len()),
            ));
        }
        Ok(RandomForestModel {
            trees: self.trees[..n_trees].to_vec(),
            config: ForestConfig {
                n_trees,
                ..self.config.clone()
            },
            per_tree_seeds: self.per_tree_seeds[..n_trees].to_vec(),
            n_features: self.n_features,
            warning: self.warning.clone(),
        })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::shape(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::data("input contains NaN"));
        }
        Ok(())
    }

    fn votes_for_one(&self, x: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict(x) == 1).count()
    }

    /// Mean decrease in impurity per feature, averaged over trees and
    /// normalized to sum to 1. Falls back to uniform weights when no tree
    /// split at all.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for tree in &self.trees {
            let [n0, n1] = tree.counts();
            let mut per_tree = vec![0.0; self.n_features];
            tree.accumulate_importance((n0 + n1) as f64, &mut per_tree);
            for (a, v) in acc.iter_mut().zip(per_tree) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= self.trees.len() as f64;
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter().map(|a| a / total).collect()
        } else {
            vec![1.0 / self.n_features as f64; self.n_features]
        }
    }
}

impl Classifier for RandomForestModel {
    /// Fraction of trees voting for class 1.
    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.votes_for_one(x) as f64 / self.trees.len() as f64)
    }

    /// Majority of tree votes; an even split goes to class 0.
    fn predict(&self, x: &[f64]) -> Result<u8> {
        self.check_input(x)?;
        let ones = self.votes_for_one(x);
        Ok(u8::from(2 * ones > self.trees.len()))
    }
}
