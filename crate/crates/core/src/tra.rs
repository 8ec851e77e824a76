//! Tree reconstruction attack.
//!
//! A queue of regions starts with the whole domain. Each popped region is
//! queried at its center; a counterfactual splits the region along every
//! axis where it differs from the center, and the pieces go back on the
//! queue. A region without counterfactual becomes a finalized leaf carrying
//! the label of its center. The reconstruction is built as the attack runs:
//! every split record becomes an internal node immediately and every queued
//! piece is a provisional leaf, so a usable classifier exists at any time.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Classifier, Label, Node, Split, TreeModel};
use crate::oracle::CounterfactualOracle;
use crate::region::{Region, Side, SplitRecord};
use crate::schema::{FeatureSchema, Point};

/// Discipline of the region queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueueOrder {
    /// Breadth first.
    #[default]
    Fifo,
    /// Depth first.
    Lifo,
    /// Uniformly random pending region, seeded.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraConfig {
    pub order: QueueOrder,
    /// Snapshot cadence in queries; 0 disables periodic snapshots.
    pub snapshot_every: u64,
    /// Stop after this many billed queries.
    pub max_queries: Option<u64>,
    /// Stop once the certified fraction reaches this value.
    pub stop_at_certified: Option<f64>,
    /// Abort when more regions than this are pending.
    pub max_pending: usize,
    /// Size of the label space. With two classes a counterfactual's side gets
    /// the complementary label provisionally; otherwise it stays unknown.
    pub n_classes: u32,
}

impl Default for TraConfig {
    fn default() -> Self {
        Self {
            order: QueueOrder::Fifo,
            snapshot_every: 20,
            max_queries: None,
            stop_at_certified: None,
            max_pending: 10_000_000,
            n_classes: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartialNode {
    Split { split: Split, left: usize, right: usize },
    /// `label` is `None` while a multi-class region is unexplored.
    Leaf { label: Option<Label>, finalized: bool },
}

/// Reconstruction in progress.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialTree {
    nodes: Vec<PartialNode>,
    n_axes: usize,
}

impl PartialTree {
    fn new(n_axes: usize) -> Self {
        Self { nodes: vec![PartialNode::Leaf { label: None, finalized: false }], n_axes }
    }

    pub fn nodes(&self) -> &[PartialNode] {
        &self.nodes
    }

    /// True when every leaf is finalized.
    pub fn is_complete(&self) -> bool {
        self.nodes.iter().all(|n| !matches!(n, PartialNode::Leaf { finalized: false, .. }))
    }

    /// Converts to a tree, unknown leaves taking `fill`.
    pub fn to_tree(&self, fill: Label) -> TreeModel {
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|n| match *n {
                PartialNode::Split { split, left, right } => Node::Split { split, left, right },
                PartialNode::Leaf { label, .. } => Node::Leaf { label: label.unwrap_or(fill) },
            })
            .collect();
        TreeModel::from_nodes(&nodes, 0, self.n_axes).expect("partial trees are well formed")
    }

    /// The finished tree, if every leaf has been finalized.
    pub fn finished(&self) -> Option<TreeModel> {
        self.is_complete().then(|| self.to_tree(Label(0)))
    }
}

impl Classifier for PartialTree {
    fn classify(&self, x: &Point) -> Option<Label> {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                PartialNode::Leaf { label, .. } => return label,
                PartialNode::Split { split, left, right } => i = if split.goes_left(x) { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub queries: u64,
    pub certified_fraction: f64,
    pub model: PartialTree,
}

/// One processed region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraStep {
    pub query_index: u64,
    pub region: Region,
    pub x: Point,
    pub label: Label,
    pub counterfactual: Option<Point>,
    pub records: Vec<SplitRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraRun {
    pub model: PartialTree,
    pub queries: u64,
    pub steps: Vec<TraStep>,
    pub snapshots: Vec<Snapshot>,
    pub finalized_volume: u128,
    pub total_volume: u128,
    /// The queue emptied.
    pub complete: bool,
    /// Complete, and every absence of counterfactual was certified by the oracle.
    pub certified: bool,
}

impl TraRun {
    pub fn certified_fraction(&self) -> f64 {
        fraction(self.finalized_volume, self.total_volume)
    }

    pub fn tree(&self) -> Option<TreeModel> {
        self.model.finished()
    }
}

fn fraction(num: u128, den: u128) -> f64 {
    if num == den {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Queue, partial tree and certified volume of a running attack.
#[derive(Debug, Clone)]
pub struct ExtractionState<'s> {
    schema: &'s FeatureSchema,
    config: TraConfig,
    queue: VecDeque<(Region, usize)>,
    tree: PartialTree,
    finalized_volume: u128,
    rng: ChaCha8Rng,
}

impl<'s> ExtractionState<'s> {
    pub fn new(schema: &'s FeatureSchema, config: TraConfig) -> Self {
        let seed = match config.order {
            QueueOrder::Random(seed) => seed,
            _ => 0,
        };
        let mut queue = VecDeque::new();
        queue.push_back((schema.full_region(), 0));
        Self {
            schema,
            config,
            queue,
            tree: PartialTree::new(schema.n_axes()),
            finalized_volume: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Finalized grid volume over total grid volume.
    pub fn certified_fraction(&self) -> f64 {
        fraction(self.finalized_volume, self.schema.total_volume())
    }

    pub fn finalized_volume(&self) -> u128 {
        self.finalized_volume
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn partial_tree(&self) -> &PartialTree {
        &self.tree
    }

    /// Pending regions with their provisional labels.
    pub fn pending_regions(&self) -> impl Iterator<Item = (&Region, Option<Label>)> {
        self.queue.iter().map(|(r, slot)| match self.tree.nodes[*slot] {
            PartialNode::Leaf { label, .. } => (r, label),
            PartialNode::Split { .. } => unreachable!("queued slots are leaves"),
        })
    }

    fn pop(&mut self) -> Option<(Region, usize)> {
        match self.config.order {
            QueueOrder::Fifo => self.queue.pop_front(),
            QueueOrder::Lifo => self.queue.pop_back(),
            QueueOrder::Random(_) => {
                if self.queue.is_empty() {
                    return None;
                }
                let i = self.rng.gen_range(0..self.queue.len());
                self.queue.swap_remove_back(i)
            }
        }
    }

    fn guess_other(&self, label: Label) -> Option<Label> {
        (self.config.n_classes == 2 && label.0 < 2).then(|| Label(1 - label.0))
    }

    fn push_leaf(&mut self, label: Option<Label>) -> usize {
        self.tree.nodes.push(PartialNode::Leaf { label, finalized: false });
        self.tree.nodes.len() - 1
    }

    /// Processes one region. Returns `Ok(None)` once the queue is empty.
    pub fn step<O: CounterfactualOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Option<TraStep>> {
        let Some((region, slot)) = self.pop() else {
            return Ok(None);
        };
        let x = region.center(self.schema)?;
        let response = oracle.query(&x, &region)?;
        let label = response.label;
        let mut records = Vec::new();
        match &response.counterfactual {
            None => {
                self.tree.nodes[slot] = PartialNode::Leaf { label: Some(label), finalized: true };
                self.finalized_volume += region.grid_volume();
            }
            Some(cf) => {
                let outcome = region.split(self.schema, &x, cf)?;
                let mut at = slot;
                let last = outcome.records.len() - 1;
                for (i, (record, piece)) in outcome.records.iter().zip(&outcome.pieces).enumerate() {
                    let query_leaf = self.push_leaf(Some(label));
                    self.queue.push_back((piece.clone(), query_leaf));
                    let other = if i == last {
                        let remainder = self.push_leaf(self.guess_other(label));
                        self.queue.push_back((outcome.pieces[last + 1].clone(), remainder));
                        remainder
                    } else {
                        self.push_leaf(None)
                    };
                    let (left, right) = match record.query_side {
                        Side::Left => (query_leaf, other),
                        Side::Right => (other, query_leaf),
                    };
                    self.tree.nodes[at] = PartialNode::Split { split: Split::new(record.axis, record.threshold), left, right };
                    at = other;
                }
                records = outcome.records;
                if self.queue.len() > self.config.max_pending {
                    return Err(Error::Capacity(alloc::format!(
                        "{} pending regions after {} queries (limit {})",
                        self.queue.len(),
                        oracle.queries(),
                        self.config.max_pending
                    )));
                }
            }
        }
        Ok(Some(TraStep {
            query_index: response.query_index,
            region,
            x,
            label,
            counterfactual: response.counterfactual,
            records,
        }))
    }

    fn snapshot(&self, queries: u64) -> Snapshot {
        Snapshot { queries, certified_fraction: self.certified_fraction(), model: self.tree.clone() }
    }
}

/// Extra capability of oracles whose "no counterfactual" answers are proofs.
pub trait CertifyingOracle {
    fn certifies_absence(&self) -> bool;
}

impl CertifyingOracle for crate::oracle::CfOracle<'_> {
    fn certifies_absence(&self) -> bool {
        matches!(self.config().mode, crate::oracle::OracleMode::Exact)
    }
}

/// Runs the attack until the queue empties or a stopping rule fires.
pub fn tra_extract<O>(oracle: &mut O, config: TraConfig) -> Result<TraRun>
where
    O: CounterfactualOracle + CertifyingOracle + ?Sized,
{
    let schema = oracle.schema().clone();
    let start = oracle.queries();
    let mut state = ExtractionState::new(&schema, config.clone());
    let mut steps = Vec::new();
    let mut snapshots = vec![state.snapshot(0)];
    loop {
        let spent = oracle.queries() - start;
        if config.max_queries.is_some_and(|m| spent >= m)
            || config.stop_at_certified.is_some_and(|c| state.certified_fraction() >= c)
        {
            break;
        }
        match state.step(oracle)? {
            None => break,
            Some(step) => steps.push(step),
        }
        let spent = oracle.queries() - start;
        if config.snapshot_every > 0 && spent.is_multiple_of(config.snapshot_every) {
            snapshots.push(state.snapshot(spent));
        }
    }
    let queries = oracle.queries() - start;
    if snapshots.last().is_some_and(|s| s.queries != queries) {
        snapshots.push(state.snapshot(queries));
    }
    let complete = state.queue.is_empty();
    Ok(TraRun {
        model: state.tree,
        queries,
        steps,
        snapshots,
        finalized_volume: state.finalized_volume,
        total_volume: schema.total_volume(),
        complete,
        certified: complete && oracle.certifies_absence(),
    })
}
