//! The metered prediction + counterfactual API.
//!
//! One call to [`CounterfactualOracle::query`] returns the label of the query
//! point and, optionally, a counterfactual restricted to a region. It is
//! billed as exactly one query. Work the server does to answer (leaf
//! enumeration, line-search predictions) is not billed.

mod exact;
mod heuristic;
mod verify;

use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use exact::{exact_ensemble_cf, exact_tree_cf, grid_cell_count};
pub use heuristic::{heuristic_cf, line_search};
pub use verify::verify_local_optimality;

use crate::error::{contract, Result};
use crate::model::{Label, Model};
use crate::region::Region;
use crate::schema::{FeatureSchema, Point};

/// Distance on min-max normalized interval axes plus Hamming over binary
/// axes and one-hot groups (a category change costs 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    /// Squared Euclidean; same minimizers as the Euclidean norm.
    #[default]
    L2,
    L1,
}

impl Distance {
    pub fn between(&self, schema: &FeatureSchema, a: &Point, b: &Point) -> f64 {
        let mut total = 0.0;
        for f in 0..schema.n_features() {
            let (va, vb) = (schema.feature_value(a, f), schema.feature_value(b, f));
            if va == vb {
                continue;
            }
            if schema.feature(f).is_categorical() {
                total += 1.0;
                continue;
            }
            let t = va.abs_diff(vb) as f64 / schema.span(f);
            total += match self {
                Distance::L2 => t * t,
                Distance::L1 => t,
            };
        }
        total
    }
}

/// Parameters of the sampling heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicParams {
    /// Maximum uniform samples per call.
    pub samples: usize,
    /// Points scanned for a label flip before sampling.
    pub training_data: Vec<Point>,
    pub seed: u64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self { samples: 1000, training_data: Vec::new(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleMode {
    /// Globally optimal counterfactuals; absence certifies that none exists.
    Exact,
    /// Locally optimal counterfactuals; absence only reports a failed search.
    Heuristic(HeuristicParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub distance: Distance,
    pub mode: OracleMode,
    /// Most grid cells the exact ensemble search may enumerate.
    pub cell_cap: u128,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { distance: Distance::L2, mode: OracleMode::Exact, cell_cap: 1_000_000 }
    }
}

impl OracleConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn heuristic(params: HeuristicParams) -> Self {
        Self { mode: OracleMode::Heuristic(params), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResponse {
    pub label: Label,
    pub counterfactual: Option<Point>,
    /// 1-based index of this call on the meter.
    pub query_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub x: Point,
    pub region: Region,
    pub response: OracleResponse,
}

/// Billing log: one record per API call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryMeter {
    records: Vec<QueryRecord>,
}

impl QueryMeter {
    pub fn count(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    fn bill(&mut self, x: Point, region: Region, label: Label, counterfactual: Option<Point>) -> OracleResponse {
        let response = OracleResponse { label, counterfactual, query_index: self.count() + 1 };
        self.records.push(QueryRecord { x, region, response: response.clone() });
        response
    }
}

/// A metered prediction + counterfactual API.
pub trait CounterfactualOracle {
    fn schema(&self) -> &FeatureSchema;

    /// Label of `x` and a counterfactual inside `region`, billed as one query.
    fn query(&mut self, x: &Point, region: &Region) -> Result<OracleResponse>;

    fn meter(&self) -> &QueryMeter;

    fn queries(&self) -> u64 {
        self.meter().count()
    }
}

/// Oracle serving a fixed tree or forest.
#[derive(Debug, Clone)]
pub struct CfOracle<'a> {
    schema: &'a FeatureSchema,
    target: &'a Model,
    config: OracleConfig,
    leaves: Vec<(Region, Label)>,
    rng: ChaCha8Rng,
    meter: QueryMeter,
}

impl<'a> CfOracle<'a> {
    pub fn new(schema: &'a FeatureSchema, target: &'a Model, config: OracleConfig) -> Result<Self> {
        target.validate(schema)?;
        if config.cell_cap == 0 {
            return Err(contract!("cell_cap must be at least 1"));
        }
        let seed = match &config.mode {
            OracleMode::Heuristic(p) => {
                if p.samples == 0 {
                    return Err(contract!("the heuristic oracle needs at least one sample"));
                }
                p.seed
            }
            OracleMode::Exact => 0,
        };
        let leaves = match target {
            Model::Tree(t) => t.leaf_regions(schema),
            Model::Forest(_) => Vec::new(),
        };
        Ok(Self { schema, target, config, leaves, rng: ChaCha8Rng::seed_from_u64(seed), meter: QueryMeter::default() })
    }

    pub fn exact(schema: &'a FeatureSchema, target: &'a Model) -> Result<Self> {
        Self::new(schema, target, OracleConfig::exact())
    }

    pub fn target(&self) -> &Model {
        self.target
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Unbilled counterfactual computation (what the server does per call).
    pub fn counterfactual(&mut self, x: &Point, region: &Region) -> Result<Option<Point>> {
        let d = self.config.distance;
        match &self.config.mode {
            OracleMode::Exact => match self.target {
                Model::Tree(t) => Ok(exact::nearest_flip(self.schema, &self.leaves, t.predict(x), x, region, d)),
                Model::Forest(f) => exact_ensemble_cf(self.schema, f, x, region, d, self.config.cell_cap),
            },
            OracleMode::Heuristic(p) => {
                Ok(heuristic_cf(self.schema, self.target, x, region, &p.training_data, p.samples, &mut self.rng))
            }
        }
    }
}

impl CounterfactualOracle for CfOracle<'_> {
    fn schema(&self) -> &FeatureSchema {
        self.schema
    }

    fn query(&mut self, x: &Point, region: &Region) -> Result<OracleResponse> {
        self.schema.validate_point(x)?;
        if !region.contains(self.schema, x) {
            return Err(contract!("query point lies outside the requested region"));
        }
        let label = self.target.predict(x);
        let cf = self.counterfactual(x, region)?;
        Ok(self.meter.bill(x.clone(), region.clone(), label, cf))
    }

    fn meter(&self) -> &QueryMeter {
        &self.meter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Node, Split, TreeModel};
    use alloc::vec;

    fn single_split(schema: &FeatureSchema, t: u32) -> Model {
        let _ = schema;
        Model::Tree(
            TreeModel::from_nodes(
                &[
                    Node::Split { split: Split::new(0, t), left: 1, right: 2 },
                    Node::Leaf { label: Label(0) },
                    Node::Leaf { label: Label(1) },
                ],
                0,
                2,
            )
            .unwrap(),
        )
    }

    #[test]
    fn metering_counts_calls() {
        let s = FeatureSchema::unit_cube(2, 1.0 / 1024.0).unwrap();
        let target = single_split(&s, 512);
        let mut o = CfOracle::exact(&s, &target).unwrap();
        let x = s.encode(&[205, 922]).unwrap();
        let r = o.query(&x, &s.full_region()).unwrap();
        assert_eq!(r.query_index, 1);
        assert_eq!(r.label, Label(0));
        // 0.5 + delta
        assert_eq!(r.counterfactual.unwrap().coords(), &[513, 922]);
        o.counterfactual(&x, &s.full_region()).unwrap();
        assert_eq!(o.queries(), 1);
        let inside_leaf = Region::from_constraints(vec![
            crate::region::Constraint::Range { lo: 0, hi: 300 },
            crate::region::Constraint::Range { lo: 0, hi: 1024 },
        ]);
        let r = o.query(&x, &inside_leaf).unwrap();
        assert!(r.counterfactual.is_none());
        assert_eq!(o.queries(), 2);
        assert!(o.query(&s.encode(&[900, 0]).unwrap(), &inside_leaf).is_err());
        assert_eq!(o.queries(), 2);
    }

    #[test]
    fn distances_are_normalized() {
        let s = FeatureSchema::new(vec![
            crate::schema::Feature::numeric("a", 0.0, 10.0, 1.0),
            crate::schema::Feature::categorical("c", 3),
        ])
        .unwrap();
        let a = s.encode(&[0, 0]).unwrap();
        let b = s.encode(&[5, 2]).unwrap();
        assert_eq!(Distance::L1.between(&s, &a, &b), 1.5);
        assert_eq!(Distance::L2.between(&s, &a, &b), 1.25);
        assert_eq!(Distance::L2.between(&s, &a, &a), 0.0);
    }
}
