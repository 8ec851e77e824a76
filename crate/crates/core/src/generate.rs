//! Synthetic targets: random trees and forests, chessboards and the
//! single-branch adversarial instances on which the attack meets its
//! worst-case query count.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ForestModel, Label, Node, Split, TreeModel};
use crate::region::{Constraint, Region, Side};
use crate::schema::{FeatureSchema, Point};

/// Adversarial single-branch instance on the unit cube `[0,1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSpec {
    /// Split levels per dimension, non-increasing.
    pub s: Vec<u32>,
    /// Number of grid steps per unit interval.
    pub grid: u32,
    /// Offset of the levels beyond the first dimension, in grid steps.
    pub eps_steps: u32,
}

impl AdversarialSpec {
    pub fn new(s: Vec<u32>) -> Self {
        Self { s, grid: 1024, eps_steps: 2 }
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::unit_cube(self.s.len(), 1.0 / self.grid as f64)
    }

    /// Grid thresholds per dimension, ascending.
    pub fn levels(&self) -> Result<Vec<Vec<u32>>> {
        let m = self.s.len();
        if m == 0 || self.s.iter().all(|&s| s == 0) {
            return Err(Error::Contract("adversarial instance needs at least one split".into()));
        }
        if self.s.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Contract("split counts must be non-increasing across dimensions".into()));
        }
        let g = self.grid as u64;
        let mut out = Vec::with_capacity(m);
        for (j, &sj) in self.s.iter().enumerate() {
            let sj = sj as u64;
            let mut levels = Vec::with_capacity(sj as usize);
            for q in 1..=sj {
                let t = if j == 0 {
                    q * g / (sj + 1)
                } else {
                    g * (q + sj + 1) / (2 * (sj + 1)) + self.eps_steps as u64
                };
                levels.push(t);
            }
            let ordered = levels.windows(2).all(|w| w[0] < w[1]);
            if !ordered || levels.iter().any(|&t| t == 0 || t >= g) {
                return Err(Error::Contract(alloc::format!(
                    "levels of dimension {j} collide on a grid of {g} steps; use a finer grid"
                )));
            }
            out.push(levels.into_iter().map(|t| t as u32).collect());
        }
        Ok(out)
    }
}

/// Builds the single-branch adversarial tree.
///
/// The branch visits dimensions from last to first and each dimension's
/// levels from high to low; the `<=` child continues the branch and the other
/// child is a leaf. Leaves are colored greedily so that touching leaves get
/// different labels.
pub fn gen_adversarial(spec: &AdversarialSpec) -> Result<TreeModel> {
    let schema = spec.schema()?;
    let levels = spec.levels()?;
    let splits: Vec<Split> = levels
        .iter()
        .enumerate()
        .rev()
        .flat_map(|(axis, ls)| ls.iter().rev().map(move |&t| Split::new(axis, t)))
        .collect();
    let mut nodes = Vec::with_capacity(2 * splits.len() + 1);
    for (i, split) in splits.iter().enumerate() {
        let here = 2 * i;
        nodes.push(Node::Split { split: *split, left: here + 2, right: here + 1 });
        nodes.push(Node::Leaf { label: Label(0) });
    }
    nodes.push(Node::Leaf { label: Label(0) });
    let tree = TreeModel::from_nodes(&nodes, 0, schema.n_axes())?;
    Ok(color_leaves(&schema, &tree))
}

fn touching(a: &Region, b: &Region) -> bool {
    let mut adjacent_on = 0;
    for (ca, cb) in a.constraints().iter().zip(b.constraints()) {
        match (*ca, *cb) {
            (Constraint::Range { lo: l1, hi: h1 }, Constraint::Range { lo: l2, hi: h2 }) => {
                if l1 <= h2 && l2 <= h1 {
                    continue;
                }
                if h1.checked_add(1) == Some(l2) || h2.checked_add(1) == Some(l1) {
                    adjacent_on += 1;
                } else {
                    return false;
                }
            }
            (Constraint::Categories(x), Constraint::Categories(y)) => {
                if x & y == 0 {
                    adjacent_on += 1;
                }
            }
            _ => return false,
        }
    }
    adjacent_on == 1
}

/// Relabels the leaves of `tree` by greedy coloring of the leaf adjacency
/// graph, in preorder: each leaf takes the lowest label unused by its
/// already-colored neighbours.
pub fn color_leaves(schema: &FeatureSchema, tree: &TreeModel) -> TreeModel {
    let leaves = tree.leaves_with_ids(schema);
    let mut colors: Vec<u32> = Vec::with_capacity(leaves.len());
    for (i, (_, region, _)) in leaves.iter().enumerate() {
        let used: Vec<u32> = (0..i).filter(|&k| touching(&leaves[k].1, region)).map(|k| colors[k]).collect();
        let c = (0..).find(|c| !used.contains(c)).expect("unbounded search");
        colors.push(c);
    }
    let mut nodes = tree.nodes().to_vec();
    for ((id, _, _), c) in leaves.iter().zip(colors) {
        nodes[*id] = Node::Leaf { label: Label(c) };
    }
    TreeModel::from_nodes(&nodes, tree.root(), tree.n_axes()).expect("relabeling keeps the shape")
}

/// Evenly spaced thresholds on an interval feature of `card` grid points.
fn even_levels(card: u32, s: u32) -> Option<Vec<u32>> {
    let span = card as u64 - 1;
    let levels: Vec<u32> = (1..=s as u64).map(|p| (p * span / (s as u64 + 1)) as u32).collect();
    let ok = levels.windows(2).all(|w| w[0] < w[1]) && levels.iter().all(|&t| (t as u64) < span);
    ok.then_some(levels)
}

/// Full grid partition with `s[f]` evenly spaced levels on feature `f`; the
/// cell with indices `(c_1, ..., c_m)` has label `(c_1 + ... + c_m) mod 2`.
///
/// Every feature must be numeric, ordinal or binary.
pub fn gen_chessboard(schema: &FeatureSchema, s: &[u32]) -> Result<TreeModel> {
    if s.len() != schema.n_features() {
        return Err(Error::Contract("one split count per feature is required".into()));
    }
    let mut levels = Vec::with_capacity(s.len());
    for (f, &sf) in s.iter().enumerate() {
        if schema.feature(f).is_categorical() {
            return Err(Error::Unsupported("chessboards need interval features".into()));
        }
        let ls = even_levels(schema.cardinality(f), sf)
            .ok_or_else(|| Error::Contract(alloc::format!("feature {f} has too few grid points for {sf} levels")))?;
        levels.push(ls);
    }
    let mut nodes = Vec::new();
    let cells: Vec<(usize, usize)> = levels.iter().map(|l| (0, l.len() + 1)).collect();
    chess_node(&schema_axes(schema), &levels, cells, &mut nodes);
    TreeModel::from_nodes(&nodes, 0, schema.n_axes())
}

fn schema_axes(schema: &FeatureSchema) -> Vec<usize> {
    (0..schema.n_features()).map(|f| schema.axes_of(f).start).collect()
}

fn chess_node(axes: &[usize], levels: &[Vec<u32>], cells: Vec<(usize, usize)>, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { label: Label(0) });
    match cells.iter().position(|&(a, b)| b - a > 1) {
        None => {
            let parity: usize = cells.iter().map(|&(a, _)| a).sum();
            nodes[id] = Node::Leaf { label: Label((parity % 2) as u32) };
        }
        Some(f) => {
            let (a, b) = cells[f];
            let mid = (a + b) / 2;
            let mut lo = cells.clone();
            lo[f] = (a, mid);
            let mut hi = cells;
            hi[f] = (mid, b);
            let left = chess_node(axes, levels, lo, nodes);
            let right = chess_node(axes, levels, hi, nodes);
            nodes[id] = Node::Split { split: Split::new(axes[f], levels[f][mid - 1]), left, right };
        }
    }
    id
}

/// Axes of `region` that some threshold still cuts, with their threshold range.
fn cuttable(schema: &FeatureSchema, region: &Region) -> Vec<(usize, u32, u32)> {
    let mut out = Vec::new();
    for f in 0..schema.n_features() {
        let axes = schema.axes_of(f);
        match region.constraint(f) {
            Constraint::Range { lo, hi } if lo < hi => out.push((axes.start, lo, hi - 1)),
            Constraint::Range { .. } => {}
            Constraint::Categories(mask) => {
                if mask.count_ones() >= 2 {
                    for (offset, axis) in axes.enumerate() {
                        if mask & (1u64 << offset) != 0 {
                            out.push((axis, 0, 0));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Random tree of the given depth whose every split cuts its node's region.
///
/// Nodes stop early only where nothing is left to cut. Labels are drawn
/// uniformly from `0..n_classes`; if depth allows a split and all leaves came
/// out equal, the last leaf is relabeled so at least two classes appear.
pub fn gen_random_tree(schema: &FeatureSchema, depth: u32, n_classes: u32, seed: u64) -> Result<TreeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tree(schema, depth, n_classes, &mut rng)
}

/// Random tree drawn from a caller-supplied generator.
pub fn random_tree<R: Rng + ?Sized>(schema: &FeatureSchema, depth: u32, n_classes: u32, rng: &mut R) -> Result<TreeModel> {
    if n_classes < 2 {
        return Err(Error::Contract("random trees need at least two classes".into()));
    }
    let mut nodes = Vec::new();
    grow(schema, schema.full_region(), depth, n_classes, rng, &mut nodes);
    let leaves: Vec<usize> = (0..nodes.len()).filter(|&i| matches!(nodes[i], Node::Leaf { .. })).collect();
    if leaves.len() >= 2 {
        let first = match nodes[leaves[0]] {
            Node::Leaf { label } => label,
            Node::Split { .. } => unreachable!(),
        };
        if leaves.iter().all(|&i| nodes[i] == Node::Leaf { label: first }) {
            let last = *leaves.last().expect("two leaves");
            nodes[last] = Node::Leaf { label: Label((first.0 + 1) % n_classes) };
        }
    }
    TreeModel::from_nodes(&nodes, 0, schema.n_axes())
}

fn grow<R: Rng + ?Sized>(
    schema: &FeatureSchema,
    region: Region,
    depth: u32,
    n_classes: u32,
    rng: &mut R,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { label: Label(rng.gen_range(0..n_classes)) });
    if depth == 0 {
        return id;
    }
    let options = cuttable(schema, &region);
    let Some(&(axis, lo, hi)) = options.choose(rng) else {
        return id;
    };
    let t = rng.gen_range(lo..=hi);
    let left_region = region.restrict(schema, axis, t, Side::Left);
    let right_region = region.restrict(schema, axis, t, Side::Right);
    let left = grow(schema, left_region, depth - 1, n_classes, rng, nodes);
    let right = grow(schema, right_region, depth - 1, n_classes, rng, nodes);
    nodes[id] = Node::Split { split: Split::new(axis, t), left, right };
    id
}

/// Forest of independent random trees.
pub fn gen_random_forest(schema: &FeatureSchema, n_trees: usize, depth: u32, n_classes: u32, seed: u64) -> Result<ForestModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees = (0..n_trees).map(|_| random_tree(schema, depth, n_classes, &mut rng)).collect::<Result<Vec<_>>>()?;
    ForestModel::new(trees)
}

/// `count` uniform grid points of the whole domain.
pub fn uniform_points<R: Rng + ?Sized>(schema: &FeatureSchema, count: usize, rng: &mut R) -> Vec<Point> {
    let full = schema.full_region();
    (0..count).map(|_| full.sample(schema, rng)).collect()
}

/// Seeded 60/20/20 partition of `0..n` into train, validation and test indices.
///
/// The validation and test parts get `round(n / 5)` rows each, so every
/// part is within one row of its nominal share.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fifth = (n + 2) / 5;
    let test = idx.split_off(n - fifth);
    let val = idx.split_off(n - 2 * fifth);
    (idx, val, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Feature;
    use alloc::vec;

    #[test]
    fn adversarial_levels_follow_the_placement() {
        let spec = AdversarialSpec::new(vec![1, 1]);
        // 1/2, then 1/4 + 1/2 + 2 steps
        assert_eq!(spec.levels().unwrap(), vec![vec![512], vec![770]]);
        let one_dim = AdversarialSpec::new(vec![3]);
        assert_eq!(one_dim.levels().unwrap(), vec![vec![256, 512, 768]]);
        assert!(AdversarialSpec::new(vec![1, 2]).levels().is_err());
        assert!(AdversarialSpec { s: vec![4], grid: 4, eps_steps: 2 }.levels().is_err());
    }

    #[test]
    fn adversarial_tree_is_one_branch_with_distinct_neighbours() {
        let spec = AdversarialSpec::new(vec![2, 1]);
        let schema = spec.schema().unwrap();
        let t = gen_adversarial(&spec).unwrap();
        let st = t.stats();
        assert_eq!((st.n, st.s.clone(), st.leaf_count, st.depth), (3, vec![2, 1], 4, 3));
        let leaves = t.leaf_regions(&schema);
        for (i, (a, la)) in leaves.iter().enumerate() {
            for (b, lb) in &leaves[i + 1..] {
                if touching(a, b) {
                    assert_ne!(la, lb);
                }
            }
        }
    }

    #[test]
    fn chessboard_cells_alternate() {
        let schema = FeatureSchema::unit_cube(2, 0.25).unwrap();
        let t = gen_chessboard(&schema, &[1, 1]).unwrap();
        assert_eq!(t.leaf_count(), 4);
        assert_eq!(t.stats().n, 2);
        let at = |a, b| t.predict(&schema.encode(&[a, b]).unwrap()).0;
        assert_eq!([at(0, 0), at(0, 4), at(4, 0), at(4, 4)], [0, 1, 1, 0]);
        let big = gen_chessboard(&FeatureSchema::unit_cube(2, 1.0 / 64.0).unwrap(), &[2, 2]).unwrap();
        assert_eq!((big.leaf_count(), big.stats().n), (9, 4));
    }

    #[test]
    fn random_trees_are_reproducible_and_bounded() {
        let schema = FeatureSchema::new(vec![
            Feature::numeric("a", 0.0, 1.0, 0.01),
            Feature::ordinal("b", 5),
            Feature::binary("c"),
            Feature::categorical("d", 3),
            Feature::numeric("e", -1.0, 1.0, 0.5),
        ])
        .unwrap();
        assert_eq!(gen_random_tree(&schema, 0, 2, 1).unwrap().leaf_count(), 1);
        for seed in 0..10 {
            let t = gen_random_tree(&schema, 8, 2, seed).unwrap();
            assert_eq!(t, gen_random_tree(&schema, 8, 2, seed).unwrap());
            let n = t.stats().n;
            assert!((1..=255).contains(&n));
            assert!(t.labels().len() >= 2);
            t.validate(&schema).unwrap();
            for (region, _) in t.leaf_regions(&schema) {
                assert!(!region.is_empty());
            }
        }
    }

    #[test]
    fn split_sizes() {
        let (a, b, c) = split_indices(1000, 3);
        assert_eq!((a.len(), b.len(), c.len()), (600, 200, 200));
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        let (a, b, c) = split_indices(7, 3);
        assert_eq!((a.len(), b.len(), c.len()), (5, 1, 1));
    }
}
