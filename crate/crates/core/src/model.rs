//! Axis-parallel classifiers: decision trees and majority-vote forests.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{contract, Error, Result};
use crate::region::{Constraint, Region, Side};
use crate::schema::{FeatureSchema, Point};

/// Class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The test `z[axis] <= threshold`; true sends a point to the left child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Split {
    pub axis: usize,
    pub threshold: u32,
}

impl Split {
    pub fn new(axis: usize, threshold: u32) -> Self {
        Self { axis, threshold }
    }

    #[inline]
    pub fn goes_left(&self, x: &Point) -> bool {
        x.get(self.axis) <= self.threshold
    }

    pub fn side(&self, x: &Point) -> Side {
        if self.goes_left(x) {
            Side::Left
        } else {
            Side::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Split { split: Split, left: usize, right: usize },
    Leaf { label: Label },
}

/// Anything that maps grid points to labels.
///
/// `None` marks an unknown prediction (an unexplored region of a partial
/// reconstruction); it never agrees with a target label.
pub trait Classifier {
    fn classify(&self, x: &Point) -> Option<Label>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn classify(&self, x: &Point) -> Option<Label> {
        (**self).classify(x)
    }
}

/// Binary decision tree stored as a node arena in preorder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeModel {
    nodes: Vec<Node>,
    n_axes: usize,
}

impl TreeModel {
    pub fn constant(label: Label, n_axes: usize) -> Self {
        Self { nodes: vec![Node::Leaf { label }], n_axes }
    }

    /// Builds a tree from an arena rooted at `root`.
    ///
    /// The arena must form a tree (no shared or cyclic children); nodes not
    /// reachable from the root are dropped and the rest renumbered in preorder.
    pub fn from_nodes(nodes: &[Node], root: usize, n_axes: usize) -> Result<Self> {
        if root >= nodes.len() {
            return Err(contract!("root {root} out of range"));
        }
        let mut seen = vec![false; nodes.len()];
        let mut out = Vec::with_capacity(nodes.len());
        // (source index, slot in `out` of the parent to patch, is_left)
        let mut stack = vec![(root, usize::MAX, false)];
        while let Some((src, parent, is_left)) = stack.pop() {
            if src >= nodes.len() {
                return Err(contract!("child index {src} out of range"));
            }
            if core::mem::replace(&mut seen[src], true) {
                return Err(contract!("node {src} reached twice; not a tree"));
            }
            let slot = out.len();
            out.push(nodes[src]);
            if parent != usize::MAX {
                if let Node::Split { left, right, .. } = &mut out[parent] {
                    if is_left {
                        *left = slot;
                    } else {
                        *right = slot;
                    }
                }
            }
            if let Node::Split { split, left, right } = nodes[src] {
                if split.axis >= n_axes {
                    return Err(contract!("split axis {} out of range", split.axis));
                }
                stack.push((right, slot, false));
                stack.push((left, slot, true));
            }
        }
        Ok(Self { nodes: out, n_axes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn n_axes(&self) -> usize {
        self.n_axes
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_of(&self, x: &Point) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { split, left, right } => i = if split.goes_left(x) { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &Point) -> Label {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { label } => label,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Distinct labels appearing in leaves.
    pub fn labels(&self) -> BTreeSet<Label> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { label } => Some(*label),
                _ => None,
            })
            .collect()
    }

    pub fn splits(&self) -> impl Iterator<Item = Split> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { split, .. } => Some(*split),
            _ => None,
        })
    }

    pub fn stats(&self) -> ModelStats {
        ModelStats::from_levels(self.n_axes, self.splits(), self.node_count(), self.leaf_count(), self.depth())
    }

    /// Checks split axes and thresholds against a schema.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if self.n_axes != schema.n_axes() {
            return Err(contract!("model has {} axes, schema has {}", self.n_axes, schema.n_axes()));
        }
        for s in self.splits() {
            if s.threshold >= schema.axis_cardinality(s.axis) {
                return Err(contract!("threshold {} is off the grid of axis {}", s.threshold, s.axis));
            }
        }
        Ok(())
    }

    /// Leaf regions as `(leaf index, region, label)`, skipping dead branches.
    pub fn leaves_with_ids(&self, schema: &FeatureSchema) -> Vec<(usize, Region, Label)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, schema.full_region())];
        while let Some((i, region)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { label } => out.push((i, region, label)),
                Node::Split { split, left, right } => {
                    let r = region.restrict(schema, split.axis, split.threshold, Side::Right);
                    if !r.is_empty() {
                        stack.push((right, r));
                    }
                    let l = region.restrict(schema, split.axis, split.threshold, Side::Left);
                    if !l.is_empty() {
                        stack.push((left, l));
                    }
                }
            }
        }
        out
    }

    /// Disjoint regions covering the grid, each with the label predicted on it.
    pub fn leaf_regions(&self, schema: &FeatureSchema) -> Vec<(Region, Label)> {
        self.leaves_with_ids(schema).into_iter().map(|(_, r, l)| (r, l)).collect()
    }
}

impl Classifier for TreeModel {
    fn classify(&self, x: &Point) -> Option<Label> {
        Some(self.predict(x))
    }
}

/// Majority-vote ensemble; ties go to the lowest label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn new(trees: Vec<TreeModel>) -> Result<Self> {
        let first = trees.first().ok_or_else(|| contract!("a forest needs at least one tree"))?;
        if trees.iter().any(|t| t.n_axes != first.n_axes) {
            return Err(contract!("trees of a forest must share one schema"));
        }
        Ok(Self { trees })
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn n_axes(&self) -> usize {
        self.trees[0].n_axes
    }

    pub fn predict(&self, x: &Point) -> Label {
        vote(self.trees.iter().map(|t| t.predict(x)))
    }

    pub fn stats(&self) -> ModelStats {
        ModelStats::from_levels(
            self.n_axes(),
            self.trees.iter().flat_map(|t| t.splits()),
            self.trees.iter().map(TreeModel::node_count).sum(),
            self.trees.iter().map(TreeModel::leaf_count).sum(),
            self.trees.iter().map(TreeModel::depth).max().unwrap_or(0),
        )
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        self.trees.iter().try_for_each(|t| t.validate(schema))
    }
}

impl Classifier for ForestModel {
    fn classify(&self, x: &Point) -> Option<Label> {
        Some(self.predict(x))
    }
}

/// Majority label of `labels`, lowest label on ties.
pub fn vote(labels: impl IntoIterator<Item = Label>) -> Label {
    let mut votes: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels {
        *votes.entry(l).or_default() += 1;
    }
    // labels ascend, so the strict comparison keeps the lowest label on ties
    let mut best = (Label(0), 0usize);
    for (label, count) in votes {
        if count > best.1 {
            best = (label, count);
        }
    }
    best.0
}

/// Either kind of target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
}

impl Model {
    pub fn predict(&self, x: &Point) -> Label {
        match self {
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.predict(x),
        }
    }

    /// `predict` with a schema check of the point.
    pub fn try_predict(&self, schema: &FeatureSchema, x: &Point) -> Result<Label> {
        if self.n_axes() != schema.n_axes() {
            return Err(contract!("model and schema disagree on the axis count"));
        }
        schema.validate_point(x)?;
        Ok(self.predict(x))
    }

    pub fn n_axes(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_axes(),
            Model::Forest(f) => f.n_axes(),
        }
    }

    pub fn stats(&self) -> ModelStats {
        match self {
            Model::Tree(t) => t.stats(),
            Model::Forest(f) => f.stats(),
        }
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        match self {
            Model::Tree(t) => t.validate(schema),
            Model::Forest(f) => f.validate(schema),
        }
    }

    /// Member trees (a single tree is a one-element slice).
    pub fn trees(&self) -> &[TreeModel] {
        match self {
            Model::Tree(t) => core::slice::from_ref(t),
            Model::Forest(f) => f.trees(),
        }
    }

    pub fn as_tree(&self) -> Option<&TreeModel> {
        match self {
            Model::Tree(t) => Some(t),
            Model::Forest(_) => None,
        }
    }
}

impl Classifier for Model {
    fn classify(&self, x: &Point) -> Option<Label> {
        Some(self.predict(x))
    }
}

impl From<TreeModel> for Model {
    fn from(t: TreeModel) -> Self {
        Model::Tree(t)
    }
}

impl From<ForestModel> for Model {
    fn from(f: ForestModel) -> Self {
        Model::Forest(f)
    }
}

/// Structural statistics; a split level is a distinct `(axis, threshold)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelStats {
    /// Distinct split levels.
    pub n: u64,
    /// Split levels per axis.
    pub s: Vec<u64>,
    pub node_count: usize,
    pub leaf_count: usize,
    pub depth: usize,
}

impl ModelStats {
    fn from_levels(
        n_axes: usize,
        splits: impl Iterator<Item = Split>,
        node_count: usize,
        leaf_count: usize,
        depth: usize,
    ) -> Self {
        let levels: BTreeSet<Split> = splits.collect();
        let mut s = vec![0u64; n_axes];
        for l in &levels {
            s[l.axis] += 1;
        }
        Self { n: levels.len() as u64, s, node_count, leaf_count, depth }
    }
}

/// Distinct split levels of a collection of trees, grouped per axis and sorted.
pub fn split_levels<'a>(n_axes: usize, trees: impl IntoIterator<Item = &'a TreeModel>) -> Vec<Vec<u32>> {
    let mut per_axis: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n_axes];
    for t in trees {
        for s in t.splits() {
            per_axis[s.axis].insert(s.threshold);
        }
    }
    per_axis.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Builds a tree that reproduces a labelled box partition of the domain.
///
/// Greedy: at every node pick a box boundary that cuts the current region,
/// preferring cuts that split the fewest boxes, then the lowest axis and
/// threshold; recurse until every region holds a single label.
pub fn boxes_to_tree(schema: &FeatureSchema, boxes: &[(Region, Label)]) -> Result<TreeModel> {
    if boxes.is_empty() {
        return Err(contract!("no boxes to convert"));
    }
    let mut total: u128 = 0;
    for (i, (a, _)) in boxes.iter().enumerate() {
        if a.is_empty() {
            return Err(contract!("box {i} is empty"));
        }
        total += a.grid_volume();
        for (b, _) in &boxes[i + 1..] {
            if a.intersect(b).is_some() {
                return Err(Error::Contract("boxes overlap".into()));
            }
        }
    }
    if total != schema.total_volume() {
        return Err(Error::Contract("boxes do not cover the domain".into()));
    }
    let mut nodes = Vec::new();
    build_from_boxes(schema, schema.full_region(), boxes.to_vec(), &mut nodes);
    TreeModel::from_nodes(&nodes, 0, schema.n_axes())
}

fn build_from_boxes(schema: &FeatureSchema, region: Region, boxes: Vec<(Region, Label)>, nodes: &mut Vec<Node>) -> usize {
    let slot = nodes.len();
    let first = boxes[0].1;
    if boxes.iter().all(|(_, l)| *l == first) {
        nodes.push(Node::Leaf { label: first });
        return slot;
    }
    let mut candidates: BTreeSet<Split> = BTreeSet::new();
    for (b, _) in &boxes {
        for f in 0..schema.n_features() {
            match (b.constraint(f), region.constraint(f)) {
                (Constraint::Range { lo, hi }, Constraint::Range { lo: rlo, hi: rhi }) => {
                    let axis = schema.axes_of(f).start;
                    if lo > rlo {
                        candidates.insert(Split::new(axis, lo - 1));
                    }
                    if hi < rhi {
                        candidates.insert(Split::new(axis, hi));
                    }
                }
                (Constraint::Categories(m), Constraint::Categories(rm)) if m != rm => {
                    for c in 0..64u32 {
                        let bit = 1u64 << c;
                        if rm & bit != 0 && rm != bit {
                            candidates.insert(Split::new(schema.axes_of(f).start + c as usize, 0));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let split = candidates
        .into_iter()
        .filter(|s| region.straddles(schema, s.axis, s.threshold))
        .min_by_key(|s| (boxes.iter().filter(|(b, _)| b.straddles(schema, s.axis, s.threshold)).count(), *s))
        .expect("a multi-label region always has a box boundary inside it");
    nodes.push(Node::Leaf { label: first });
    let mut sides = [Vec::new(), Vec::new()];
    for (b, l) in boxes {
        for (k, side) in [Side::Left, Side::Right].into_iter().enumerate() {
            let part = b.restrict(schema, split.axis, split.threshold, side);
            if !part.is_empty() {
                sides[k].push((part, l));
            }
        }
    }
    let [lb, rb] = sides;
    let left = build_from_boxes(schema, region.restrict(schema, split.axis, split.threshold, Side::Left), lb, nodes);
    let right = build_from_boxes(schema, region.restrict(schema, split.axis, split.threshold, Side::Right), rb, nodes);
    nodes[slot] = Node::Split { split, left, right };
    slot
}
