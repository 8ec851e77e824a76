use alloc::vec::Vec;

use super::Distance;
use crate::error::{Error, Result};
use crate::model::{split_levels, ForestModel, Label, TreeModel};
use crate::region::{Constraint, Region};
use crate::schema::{FeatureSchema, Point};

/// Keeps the candidate with the smallest `(distance, point)`.
#[derive(Default)]
struct Best {
    best: Option<(f64, Point)>,
}

impl Best {
    fn offer(&mut self, d: f64, p: Point) {
        let better = match &self.best {
            None => true,
            Some((bd, bp)) => d < *bd || (d == *bd && p < *bp),
        };
        if better {
            self.best = Some((d, p));
        }
    }
}

pub(super) fn nearest_flip(
    schema: &FeatureSchema,
    leaves: &[(Region, Label)],
    label: Label,
    x: &Point,
    region: &Region,
    d: Distance,
) -> Option<Point> {
    let mut best = Best::default();
    for (leaf, leaf_label) in leaves {
        if *leaf_label == label {
            continue;
        }
        if let Some(piece) = leaf.intersect(region) {
            let p = piece.project(schema, x);
            best.offer(d.between(schema, x, &p), p);
        }
    }
    best.best.map(|(_, p)| p)
}

/// Globally optimal counterfactual of `x` inside `region` for a single tree.
///
/// Projects `x` onto every leaf region of another label intersected with
/// `region` and keeps the nearest projection; co-optimal points are ordered
/// lexicographically.
pub fn exact_tree_cf(schema: &FeatureSchema, target: &TreeModel, x: &Point, region: &Region, d: Distance) -> Option<Point> {
    nearest_flip(schema, &target.leaf_regions(schema), target.predict(x), x, region, d)
}

/// Pieces of one feature's constraint cut by the given split levels.
fn feature_pieces(schema: &FeatureSchema, feature: usize, c: Constraint, levels: &[Vec<u32>]) -> Vec<Constraint> {
    let axes = schema.axes_of(feature);
    match c {
        Constraint::Range { lo, hi } => {
            let mut out = Vec::new();
            let mut start = lo;
            for &t in &levels[axes.start] {
                if t >= start && t < hi {
                    out.push(Constraint::Range { lo: start, hi: t });
                    start = t + 1;
                }
            }
            out.push(Constraint::Range { lo: start, hi });
            out
        }
        Constraint::Categories(mask) => {
            let mut rest = mask;
            let mut out = Vec::new();
            for (offset, axis) in axes.enumerate() {
                let bit = 1u64 << offset;
                if mask & bit != 0 && levels[axis].contains(&0) {
                    out.push(Constraint::Categories(bit));
                    rest &= !bit;
                }
            }
            if rest != 0 {
                out.push(Constraint::Categories(rest));
            }
            out
        }
    }
}

fn cell_pieces(schema: &FeatureSchema, region: &Region, trees: &[TreeModel]) -> Vec<Vec<Constraint>> {
    let levels = split_levels(schema.n_axes(), trees);
    (0..schema.n_features()).map(|f| feature_pieces(schema, f, region.constraint(f), &levels)).collect()
}

/// Number of cells the union of the forest's split levels induces inside `region`.
pub fn grid_cell_count(schema: &FeatureSchema, forest: &ForestModel, region: &Region) -> u128 {
    if region.is_empty() {
        return 0;
    }
    cell_pieces(schema, region, forest.trees()).iter().map(|p| p.len() as u128).product()
}

/// Globally optimal counterfactual of `x` inside `region` for a forest.
///
/// Enumerates the cells of the union split-level grid inside `region`; the
/// forest is constant on each, so evaluating one representative per cell and
/// projecting `x` onto the label-flipping cells is exact.
pub fn exact_ensemble_cf(
    schema: &FeatureSchema,
    forest: &ForestModel,
    x: &Point,
    region: &Region,
    d: Distance,
    cell_cap: u128,
) -> Result<Option<Point>> {
    if region.is_empty() {
        return Ok(None);
    }
    let pieces = cell_pieces(schema, region, forest.trees());
    let cells: u128 = pieces.iter().map(|p| p.len() as u128).product();
    if cells > cell_cap {
        return Err(Error::Capacity(alloc::format!(
            "{cells} grid cells exceed the cap of {cell_cap}; use the heuristic oracle"
        )));
    }
    let label = forest.predict(x);
    let mut best = Best::default();
    let mut odometer = alloc::vec![0usize; pieces.len()];
    let mut cell = region.clone();
    loop {
        for (f, &i) in odometer.iter().enumerate() {
            cell.set_constraint(f, pieces[f][i]);
        }
        if forest.predict(&cell.low_corner(schema)) != label {
            let p = cell.project(schema, x);
            best.offer(d.between(schema, x, &p), p);
        }
        let mut f = 0;
        loop {
            if f == pieces.len() {
                return Ok(best.best.map(|(_, p)| p));
            }
            odometer[f] += 1;
            if odometer[f] < pieces[f].len() {
                break;
            }
            odometer[f] = 0;
            f += 1;
        }
    }
}
