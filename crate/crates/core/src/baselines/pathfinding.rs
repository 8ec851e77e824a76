use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{boxes_to_tree, Label, Model, TreeModel};
use crate::region::{Constraint, Region};
use crate::schema::{FeatureKind, FeatureSchema, Point};

/// API returning the label and an identifier of the leaf reached.
#[derive(Debug, Clone)]
pub struct LeafIdOracle<'a> {
    schema: &'a FeatureSchema,
    target: &'a TreeModel,
    records: Vec<(Point, Label, usize)>,
}

impl<'a> LeafIdOracle<'a> {
    /// Fails on forests, which have no single leaf per input.
    pub fn new(schema: &'a FeatureSchema, target: &'a Model) -> Result<Self> {
        let tree = target
            .as_tree()
            .ok_or_else(|| Error::Unsupported("leaf identifiers need a single-tree target".into()))?;
        tree.validate(schema)?;
        Ok(Self { schema, target: tree, records: Vec::new() })
    }

    pub fn schema(&self) -> &FeatureSchema {
        self.schema
    }

    /// One billed query.
    pub fn query(&mut self, x: &Point) -> Result<(Label, usize)> {
        self.schema.validate_point(x)?;
        let leaf = self.target.leaf_of(x);
        let label = self.target.predict(x);
        self.records.push((x.clone(), label, leaf));
        Ok((label, leaf))
    }

    pub fn queries(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn records(&self) -> &[(Point, Label, usize)] {
        &self.records
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathFindingRun {
    pub tree: TreeModel,
    pub queries: u64,
    /// Disjoint labelled boxes covering the domain.
    pub boxes: Vec<(Region, Label)>,
    /// Boundary precision used on each feature, in grid steps.
    pub steps: Vec<u32>,
}

/// Parts of `a` outside `b`, as disjoint regions.
fn subtract(a: &Region, b: &Region) -> Vec<Region> {
    let Some(inner) = a.intersect(b) else {
        return alloc::vec![a.clone()];
    };
    let mut out = Vec::new();
    let mut rest = a.clone();
    for f in 0..a.constraints().len() {
        let (ca, ci) = (rest.constraint(f), inner.constraint(f));
        match (ca, ci) {
            (Constraint::Range { lo, hi }, Constraint::Range { lo: il, hi: ih }) => {
                if lo < il {
                    let mut piece = rest.clone();
                    piece.set_constraint(f, Constraint::Range { lo, hi: il - 1 });
                    out.push(piece);
                }
                if ih < hi {
                    let mut piece = rest.clone();
                    piece.set_constraint(f, Constraint::Range { lo: ih + 1, hi });
                    out.push(piece);
                }
            }
            (Constraint::Categories(m), Constraint::Categories(im)) => {
                if m & !im != 0 {
                    let mut piece = rest.clone();
                    piece.set_constraint(f, Constraint::Categories(m & !im));
                    out.push(piece);
                }
            }
            _ => unreachable!("regions of one schema"),
        }
        rest.set_constraint(f, ci);
    }
    out
}

/// Walks from `start` toward `end` along `feature` and returns the farthest
/// value still in `leaf`, located by bisection to within `step` grid points.
fn boundary(
    oracle: &mut LeafIdOracle<'_>,
    seed: &Point,
    feature: usize,
    leaf: usize,
    start: u32,
    end: u32,
    step: u32,
) -> Result<u32> {
    if start == end {
        return Ok(start);
    }
    let schema = oracle.schema.clone();
    let mut probe = seed.clone();
    let mut inside = |v: u32, oracle: &mut LeafIdOracle<'_>| -> Result<bool> {
        schema.set_feature_value(&mut probe, feature, v);
        Ok(oracle.query(&probe)?.1 == leaf)
    };
    if inside(end, oracle)? {
        return Ok(end);
    }
    let (mut good, mut bad) = (start, end);
    while good.abs_diff(bad) > step {
        let mid = if good < bad { good + (bad - good) / 2 } else { bad + (good - bad).div_ceil(2) };
        if inside(mid, oracle)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Leaf-box discovery by per-feature bisection.
///
/// Starting from the center of an uncovered region, the seed's leaf box is
/// measured feature by feature: an interval feature by bisection toward both
/// domain ends, a categorical feature by probing every other category. Each
/// probe is one billed query. The box, clipped to the uncovered area, is
/// recorded and the next seed is taken from what remains. `epsilon` is the
/// boundary precision on numeric features; it never goes below one grid step.
pub fn pathfinding_extract(oracle: &mut LeafIdOracle<'_>, epsilon: f64) -> Result<PathFindingRun> {
    let schema = oracle.schema.clone();
    let steps: Vec<u32> = schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Numeric { delta, .. } => {
                let k = libm::floor(epsilon / delta + 1e-9);
                if k >= 1.0 { k.min(u32::MAX as f64) as u32 } else { 1 }
            }
            _ => 1,
        })
        .collect();
    let start = oracle.queries();
    let mut uncovered = alloc::vec![schema.full_region()];
    let mut boxes = Vec::new();
    while let Some(next) = uncovered.first() {
        let seed = next.center(&schema)?;
        let (label, leaf) = oracle.query(&seed)?;
        let mut constraints = Vec::with_capacity(schema.n_features());
        for f in 0..schema.n_features() {
            let v = schema.feature_value(&seed, f);
            let card = schema.cardinality(f);
            if schema.feature(f).is_categorical() {
                let mut mask = 1u64 << v;
                let mut probe = seed.clone();
                for c in (0..card).filter(|&c| c != v) {
                    schema.set_feature_value(&mut probe, f, c);
                    if oracle.query(&probe)?.1 == leaf {
                        mask |= 1u64 << c;
                    }
                }
                constraints.push(Constraint::Categories(mask));
            } else {
                let hi = boundary(oracle, &seed, f, leaf, v, card - 1, steps[f])?;
                let lo = boundary(oracle, &seed, f, leaf, v, 0, steps[f])?;
                constraints.push(Constraint::Range { lo, hi });
            }
        }
        let found = Region::from_constraints(constraints);
        let mut remaining = Vec::with_capacity(uncovered.len());
        for u in uncovered.drain(..) {
            if let Some(part) = u.intersect(&found) {
                boxes.push((part, label));
            }
            remaining.extend(subtract(&u, &found));
        }
        uncovered = remaining;
    }
    let tree = boxes_to_tree(&schema, &boxes)?;
    Ok(PathFindingRun { tree, queries: oracle.queries() - start, boxes, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Node, Split};

    #[test]
    fn single_leaf_costs_two_probes_per_feature() {
        let schema = FeatureSchema::unit_cube(3, 0.25).unwrap();
        let target = Model::Tree(TreeModel::constant(Label(1), 3));
        let mut o = LeafIdOracle::new(&schema, &target).unwrap();
        let run = pathfinding_extract(&mut o, 1e-5).unwrap();
        assert_eq!(run.queries, 1 + 2 * 3);
        assert_eq!(run.boxes, alloc::vec![(schema.full_region(), Label(1))]);
    }

    #[test]
    fn single_split_is_recovered_exactly() {
        let schema = FeatureSchema::unit_cube(2, 1.0 / 1024.0).unwrap();
        let tree = TreeModel::from_nodes(
            &[
                Node::Split { split: Split::new(0, 512), left: 1, right: 2 },
                Node::Leaf { label: Label(0) },
                Node::Leaf { label: Label(1) },
            ],
            0,
            2,
        )
        .unwrap();
        let target = Model::Tree(tree.clone());
        let mut o = LeafIdOracle::new(&schema, &target).unwrap();
        let run = pathfinding_extract(&mut o, 1e-5).unwrap();
        assert_eq!(run.steps, alloc::vec![1, 1]);
        assert_eq!(run.tree.splits().collect::<Vec<_>>(), alloc::vec![Split::new(0, 512)]);
        assert!(run.queries > 10, "{}", run.queries);
        let forest = Model::Forest(crate::model::ForestModel::new(alloc::vec![tree]).unwrap());
        assert!(matches!(LeafIdOracle::new(&schema, &forest), Err(Error::Unsupported(_))));
    }

    #[test]
    fn subtraction_partitions() {
        let a = Region::from_constraints(alloc::vec![Constraint::Range { lo: 0, hi: 9 }, Constraint::Categories(0b111)]);
        let b = Region::from_constraints(alloc::vec![Constraint::Range { lo: 3, hi: 5 }, Constraint::Categories(0b010)]);
        let parts = subtract(&a, &b);
        let vol: u128 = parts.iter().map(Region::grid_volume).sum();
        assert_eq!(vol, 30 - 3);
        assert!(parts.iter().all(|p| p.intersect(&b).is_none()));
    }
}
