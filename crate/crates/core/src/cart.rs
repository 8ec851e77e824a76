//! CART induction with Gini impurity, bagged forests and minimal
//! cost-complexity pruning.
//!
//! Training works directly on grid coordinates. A candidate threshold sits
//! halfway between two consecutive distinct values of an axis, rounded down,
//! so the test `z <= t` separates them on the grid.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Result};
use crate::model::{ForestModel, Label, Node, Split, TreeModel};
use crate::schema::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureSubsample {
    /// Every axis is a split candidate.
    #[default]
    All,
    /// `floor(sqrt(axes))` random axes per node (at least one), widened only
    /// when none of them can split the node.
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_depth: Option<u32>,
    pub min_samples_split: usize,
    pub n_trees: usize,
    pub bootstrap: bool,
    pub feature_subsample: FeatureSubsample,
    pub ccp_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            n_trees: 1,
            bootstrap: false,
            feature_subsample: FeatureSubsample::All,
            ccp_grid: ccp_grid(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Bagged forest defaults: bootstrap and square-root feature subsampling.
    pub fn forest(n_trees: usize, seed: u64) -> Self {
        Self { n_trees, bootstrap: true, feature_subsample: FeatureSubsample::Sqrt, seed, ..Self::default() }
    }
}

/// 50 evenly spaced pruning strengths from 0 to 0.2.
pub fn ccp_grid() -> Vec<f64> {
    (0..50).map(|i| 0.2 * i as f64 / 49.0).collect()
}

/// A tree with the training class counts of every node (indexed like the nodes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainedTree {
    pub tree: TreeModel,
    pub counts: Vec<Vec<u64>>,
    pub n_samples: u64,
}

fn majority(counts: &[u64]) -> Label {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Label(best as u32)
}

/// `n * gini` for class counts summing to `n`.
fn weighted_gini(counts: &[u64], n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

struct Builder<'a, R> {
    points: &'a [Point],
    labels: &'a [Label],
    n_classes: usize,
    n_axes: usize,
    config: &'a TrainConfig,
    rng: &'a mut R,
    nodes: Vec<Node>,
    counts: Vec<Vec<u64>>,
}

impl<R: Rng> Builder<'_, R> {
    fn class_counts(&self, idx: &[usize]) -> Vec<u64> {
        let mut c = vec![0u64; self.n_classes];
        for &i in idx {
            c[self.labels[i].0 as usize] += 1;
        }
        c
    }

    /// Best `(score, threshold)` on one axis, if any threshold separates samples.
    fn best_on_axis(&self, idx: &mut [usize], axis: usize, total: &[u64]) -> Option<(f64, u32)> {
        idx.sort_by_key(|&i| self.points[i].get(axis));
        let n = idx.len() as u64;
        let mut left = vec![0u64; self.n_classes];
        let mut best: Option<(f64, u32)> = None;
        for k in 0..idx.len() - 1 {
            left[self.labels[idx[k]].0 as usize] += 1;
            let (a, b) = (self.points[idx[k]].get(axis), self.points[idx[k + 1]].get(axis));
            if a == b {
                continue;
            }
            let nl = k as u64 + 1;
            let right: Vec<u64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score = weighted_gini(&left, nl) + weighted_gini(&right, n - nl);
            if best.is_none_or(|(s, _)| score < s - 1e-9) {
                best = Some((score, a + (b - a) / 2));
            }
        }
        best
    }

    fn candidate_axes(&mut self) -> Vec<usize> {
        let mut axes: Vec<usize> = (0..self.n_axes).collect();
        if self.config.feature_subsample == FeatureSubsample::Sqrt {
            axes.shuffle(self.rng);
        }
        axes
    }

    fn grow(&mut self, idx: &mut [usize], depth: u32) -> usize {
        let id = self.nodes.len();
        let total = self.class_counts(idx);
        let label = majority(&total);
        self.nodes.push(Node::Leaf { label });
        self.counts.push(total.clone());
        let pure = total.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = self.config.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || idx.len() < self.config.min_samples_split.max(2) {
            return id;
        }
        let order = self.candidate_axes();
        let wanted = match self.config.feature_subsample {
            FeatureSubsample::All => self.n_axes,
            FeatureSubsample::Sqrt => (libm::floor(libm::sqrt(self.n_axes as f64)) as usize).max(1),
        };
        // axes are examined in `order` until `wanted` have been seen and one splits
        let mut examined: Vec<usize> = Vec::new();
        let mut found = false;
        for &axis in &order {
            if examined.len() >= wanted && found {
                break;
            }
            examined.push(axis);
            if !found {
                found = idx.iter().any(|&i| self.points[i].get(axis) != self.points[idx[0]].get(axis));
            }
        }
        examined.sort_unstable();
        let mut best: Option<(f64, usize, u32)> = None;
        for axis in examined {
            if let Some((score, t)) = self.best_on_axis(idx, axis, &total) {
                if best.is_none_or(|(s, _, _)| score < s - 1e-9) {
                    best = Some((score, axis, t));
                }
            }
        }
        let Some((_, axis, t)) = best else {
            return id;
        };
        let split = Split::new(axis, t);
        let points = self.points;
        let mid = partition(idx, |&i| split.goes_left(&points[i]));
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { split, left, right };
        id
    }
}

/// Moves elements satisfying `pred` to the front and returns their count.
fn partition<T, F: Fn(&T) -> bool>(v: &mut [T], pred: F) -> usize {
    let mut k = 0;
    for i in 0..v.len() {
        if pred(&v[i]) {
            v.swap(i, k);
            k += 1;
        }
    }
    k
}

fn check_data(points: &[Point], labels: &[Label]) -> Result<usize> {
    let first = points.first().ok_or_else(|| contract!("training needs at least one sample"))?;
    if points.len() != labels.len() {
        return Err(contract!("{} points but {} labels", points.len(), labels.len()));
    }
    if points.iter().any(|p| p.len() != first.len()) {
        return Err(contract!("training points differ in length"));
    }
    Ok(first.len())
}

fn grow_tree<R: Rng>(points: &[Point], labels: &[Label], idx: &mut [usize], config: &TrainConfig, rng: &mut R) -> Result<TrainedTree> {
    let n_axes = check_data(points, labels)?;
    let n_classes = labels.iter().map(|l| l.0 as usize + 1).max().unwrap_or(1);
    let mut b = Builder { points, labels, n_classes, n_axes, config, rng, nodes: Vec::new(), counts: Vec::new() };
    b.grow(idx, 0);
    let (nodes, counts) = (b.nodes, b.counts);
    // nodes were pushed in preorder, which is the canonical numbering
    let tree = TreeModel::from_nodes(&nodes, 0, n_axes)?;
    Ok(TrainedTree { tree, counts, n_samples: idx.len() as u64 })
}

/// Unpruned CART tree, keeping per-node training counts.
pub fn train_tree_with_stats(points: &[Point], labels: &[Label], config: &TrainConfig) -> Result<TrainedTree> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    grow_tree(points, labels, &mut idx, config, &mut rng)
}

pub fn train_tree(points: &[Point], labels: &[Label], config: &TrainConfig) -> Result<TreeModel> {
    Ok(train_tree_with_stats(points, labels, config)?.tree)
}

/// Bagged forest of `config.n_trees` trees.
pub fn train_forest(points: &[Point], labels: &[Label], config: &TrainConfig) -> Result<ForestModel> {
    check_data(points, labels)?;
    if config.n_trees == 0 {
        return Err(contract!("a forest needs at least one tree"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = points.len();
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let mut idx: Vec<usize> =
            if config.bootstrap { (0..n).map(|_| tree_rng.gen_range(0..n)).collect() } else { (0..n).collect() };
        trees.push(grow_tree(points, labels, &mut idx, config, &mut tree_rng)?.tree);
    }
    ForestModel::new(trees)
}

/// Minimal cost-complexity pruning at strength `alpha`.
///
/// Repeatedly collapses the internal node with the smallest effective alpha
/// `(R(t) - R(T_t)) / (leaves(T_t) - 1)`, where `R` is the training error
/// rate, while that value does not exceed `alpha`.
pub fn prune_at(trained: &TrainedTree, alpha: f64) -> TreeModel {
    let nodes = trained.tree.nodes();
    let total = trained.n_samples.max(1) as f64;
    let leaf_error = |i: usize| {
        let c = &trained.counts[i];
        (c.iter().sum::<u64>() - c[majority(c).0 as usize]) as f64 / total
    };
    let mut collapsed = vec![false; nodes.len()];
    loop {
        // (subtree error, leaves) bottom-up; nodes are in preorder so children follow parents
        let mut sub = vec![(0.0f64, 0u64); nodes.len()];
        let mut weakest: Option<(f64, usize)> = None;
        for i in (0..nodes.len()).rev() {
            sub[i] = match nodes[i] {
                Node::Split { left, right, .. } if !collapsed[i] => {
                    let (el, nl) = sub[left];
                    let (er, nr) = sub[right];
                    let (e, n) = (el + er, nl + nr);
                    let g = (leaf_error(i) - e) / (n - 1) as f64;
                    if weakest.is_none_or(|(w, _)| g <= w + 1e-12) {
                        weakest = Some((g, i));
                    }
                    (e, n)
                }
                _ => (leaf_error(i), 1),
            };
        }
        match weakest {
            Some((g, i)) if g <= alpha + 1e-12 => collapsed[i] = true,
            _ => break,
        }
    }
    let rebuilt: Vec<Node> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| if collapsed[i] { Node::Leaf { label: majority(&trained.counts[i]) } } else { *n })
        .collect();
    TreeModel::from_nodes(&rebuilt, 0, trained.tree.n_axes()).expect("pruning keeps a tree")
}

/// Picks the pruning strength of `grid` with the best validation accuracy,
/// preferring the larger strength on ties.
pub fn prune(trained: &TrainedTree, val_points: &[Point], val_labels: &[Label], grid: &[f64]) -> Result<TreeModel> {
    if val_points.is_empty() || val_points.len() != val_labels.len() {
        return Err(contract!("pruning needs a non-empty labelled validation set"));
    }
    let mut best: Option<(usize, TreeModel)> = None;
    for &alpha in grid {
        let t = prune_at(trained, alpha);
        let hits = val_points.iter().zip(val_labels).filter(|(p, l)| t.predict(p) == **l).count();
        if best.as_ref().is_none_or(|(h, _)| hits >= *h) {
            best = Some((hits, t));
        }
    }
    Ok(best.map_or_else(|| trained.tree.clone(), |(_, t)| t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[u32]]) -> Vec<Point> {
        v.iter().map(|c| Point::new(c.to_vec())).collect()
    }

    fn labels(v: &[u32]) -> Vec<Label> {
        v.iter().map(|&l| Label(l)).collect()
    }

    #[test]
    fn separable_one_feature() {
        let p = pts(&[&[1], &[2], &[3], &[8], &[9]]);
        let t = train_tree(&p, &labels(&[0, 0, 0, 1, 1]), &TrainConfig::default()).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.splits().next().unwrap(), Split::new(0, 5));
    }

    #[test]
    fn pure_data_is_a_leaf() {
        let p = pts(&[&[1, 2], &[3, 4]]);
        let t = train_tree(&p, &labels(&[1, 1]), &TrainConfig::default()).unwrap();
        assert_eq!((t.leaf_count(), t.predict(&p[0])), (1, Label(1)));
        assert!(train_tree(&[], &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn xor_needs_depth_two() {
        let p = pts(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let l = labels(&[0, 1, 1, 0]);
        let t = train_tree(&p, &l, &TrainConfig::default()).unwrap();
        assert_eq!(t.depth(), 2);
        assert!(p.iter().zip(&l).all(|(x, y)| t.predict(x) == *y));
    }

    #[test]
    fn pruning_extremes() {
        let p = pts(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1], &[2, 2]]);
        let l = labels(&[0, 1, 1, 0, 0]);
        let trained = train_tree_with_stats(&p, &l, &TrainConfig::default()).unwrap();
        assert_eq!(prune_at(&trained, 0.0), trained.tree);
        let root = prune_at(&trained, 10.0);
        assert_eq!((root.leaf_count(), root.predict(&p[0])), (1, Label(0)));
    }

    #[test]
    fn single_unbagged_forest_matches_tree() {
        let p = pts(&[&[0, 5], &[3, 1], &[4, 4], &[7, 2], &[2, 2]]);
        let l = labels(&[0, 1, 1, 0, 1]);
        let config = TrainConfig { n_trees: 1, ..TrainConfig::default() };
        let f = train_forest(&p, &l, &config).unwrap();
        assert_eq!(f.trees()[0], train_tree(&p, &l, &config).unwrap());
    }
}
