use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cart::{train_forest, train_tree, TrainConfig};
use crate::error::Result;
use crate::model::{Label, Model, ModelStats, TreeModel};
use crate::oracle::CounterfactualOracle;
use crate::schema::Point;

/// Query allowance of the surrogate attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackBudget {
    pub max_queries: u64,
}

impl AttackBudget {
    /// Fifty queries per node of the target.
    pub fn for_target(stats: &ModelStats) -> Self {
        Self { max_queries: 50 * stats.node_count as u64 }
    }
}

/// Hypothesis class of the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateSpec {
    Tree(TrainConfig),
    Forest(TrainConfig),
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec::Tree(TrainConfig::default())
    }
}

impl SurrogateSpec {
    fn fit(&self, n_axes: usize, points: &[Point], labels: &[Label]) -> Result<Model> {
        if points.is_empty() {
            return Ok(Model::Tree(TreeModel::constant(Label(0), n_axes)));
        }
        Ok(match self {
            SurrogateSpec::Tree(c) => Model::Tree(train_tree(points, labels, c)?),
            SurrogateSpec::Forest(c) => Model::Forest(train_forest(points, labels, c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSnapshot {
    pub queries: u64,
    pub model: Model,
}

/// Result of a surrogate attack. Such a model is never certified equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateRun {
    pub model: Model,
    pub queries: u64,
    pub snapshots: Vec<SurrogateSnapshot>,
    pub points: Vec<Point>,
    pub labels: Vec<Label>,
}

struct Collector<'o, O: ?Sized> {
    oracle: &'o mut O,
    start: u64,
    budget: u64,
    n_classes: u32,
    points: Vec<Point>,
    labels: Vec<Label>,
    spec: &'o SurrogateSpec,
    snapshot_every: u64,
    snapshots: Vec<SurrogateSnapshot>,
}

impl<O: CounterfactualOracle + ?Sized> Collector<'_, O> {
    fn spent(&self) -> u64 {
        self.oracle.queries() - self.start
    }

    fn can_query(&self) -> bool {
        self.spent() < self.budget
    }

    fn query(&mut self, x: &Point) -> Result<(Label, Option<Point>)> {
        let full = self.oracle.schema().full_region();
        let r = self.oracle.query(x, &full)?;
        let spent = self.spent();
        if self.snapshot_every > 0 && spent.is_multiple_of(self.snapshot_every) {
            let model = self.spec.fit(self.oracle.schema().n_axes(), &self.points, &self.labels)?;
            self.snapshots.push(SurrogateSnapshot { queries: spent, model });
        }
        Ok((r.label, r.counterfactual))
    }

    fn push(&mut self, x: Point, label: Label) {
        self.points.push(x);
        self.labels.push(label);
    }

    /// Label of a counterfactual of a point labelled `label`: the other class
    /// in binary tasks, otherwise one more billed query.
    fn cf_label(&mut self, cf: &Point, label: Label) -> Result<Option<Label>> {
        if self.n_classes == 2 && label.0 < 2 {
            return Ok(Some(Label(1 - label.0)));
        }
        if !self.can_query() {
            return Ok(None);
        }
        Ok(Some(self.query(cf)?.0))
    }

    fn finish(mut self) -> Result<SurrogateRun> {
        let n_axes = self.oracle.schema().n_axes();
        let model = self.spec.fit(n_axes, &self.points, &self.labels)?;
        let queries = self.spent();
        if self.snapshots.last().is_none_or(|s| s.queries != queries) {
            self.snapshots.push(SurrogateSnapshot { queries, model: model.clone() });
        }
        Ok(SurrogateRun { model, queries, snapshots: self.snapshots, points: self.points, labels: self.labels })
    }
}

fn collector<'o, O: CounterfactualOracle + ?Sized>(
    oracle: &'o mut O,
    budget: AttackBudget,
    spec: &'o SurrogateSpec,
    n_classes: u32,
    snapshot_every: u64,
) -> Result<Collector<'o, O>> {
    let start = oracle.queries();
    let n_axes = oracle.schema().n_axes();
    let initial = spec.fit(n_axes, &[], &[])?;
    Ok(Collector {
        oracle,
        start,
        budget: budget.max_queries,
        n_classes,
        points: Vec::new(),
        labels: Vec::new(),
        spec,
        snapshot_every,
        snapshots: alloc::vec![SurrogateSnapshot { queries: 0, model: initial }],
    })
}

/// Trains a surrogate on uniform samples and their counterfactuals.
///
/// Snapshots retrain the surrogate every `snapshot_every` queries (0 keeps
/// only the initial and final models).
pub fn cf_attack<O: CounterfactualOracle + ?Sized>(
    oracle: &mut O,
    budget: AttackBudget,
    spec: &SurrogateSpec,
    n_classes: u32,
    snapshot_every: u64,
    seed: u64,
) -> Result<SurrogateRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = oracle.schema().full_region();
    let schema = oracle.schema().clone();
    let mut c = collector(oracle, budget, spec, n_classes, snapshot_every)?;
    while c.can_query() {
        let x = full.sample(&schema, &mut rng);
        let (label, cf) = c.query(&x)?;
        c.push(x, label);
        if let Some(cf) = cf {
            if let Some(l) = c.cf_label(&cf, label)? {
                c.push(cf, l);
            }
        }
    }
    c.finish()
}

/// Like [`cf_attack`], also querying each counterfactual for its own
/// counterfactual and adding that point.
pub fn dualcf_attack<O: CounterfactualOracle + ?Sized>(
    oracle: &mut O,
    budget: AttackBudget,
    spec: &SurrogateSpec,
    n_classes: u32,
    snapshot_every: u64,
    seed: u64,
) -> Result<SurrogateRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = oracle.schema().full_region();
    let schema = oracle.schema().clone();
    let mut c = collector(oracle, budget, spec, n_classes, snapshot_every)?;
    while c.can_query() {
        let x = full.sample(&schema, &mut rng);
        let (label, cf) = c.query(&x)?;
        c.push(x, label);
        let Some(cf) = cf else { continue };
        if !c.can_query() {
            if let Some(l) = c.cf_label(&cf, label)? {
                c.push(cf, l);
            }
            break;
        }
        let (cf_label, ccf) = c.query(&cf)?;
        c.push(cf, cf_label);
        if let Some(ccf) = ccf {
            if let Some(l) = c.cf_label(&ccf, cf_label)? {
                c.push(ccf, l);
            }
        }
    }
    c.finish()
}
