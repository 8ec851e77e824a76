//! Axis-aligned regions of the quantized input space.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{contract, Result};
use crate::schema::{FeatureKind, FeatureSchema, Point};

/// Constraint on one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// Inclusive interval of grid coordinates (numeric, ordinal and binary features).
    Range { lo: u32, hi: u32 },
    /// Bit mask of allowed categories.
    Categories(u64),
}

impl Constraint {
    pub fn is_empty(&self) -> bool {
        match *self {
            Constraint::Range { lo, hi } => lo > hi,
            Constraint::Categories(mask) => mask == 0,
        }
    }

    pub fn size(&self) -> u128 {
        match *self {
            Constraint::Range { lo, hi } if lo <= hi => (hi - lo) as u128 + 1,
            Constraint::Range { .. } => 0,
            Constraint::Categories(mask) => mask.count_ones() as u128,
        }
    }

    pub fn intersect(&self, other: &Constraint) -> Constraint {
        match (*self, *other) {
            (Constraint::Range { lo: a, hi: b }, Constraint::Range { lo: c, hi: d }) => {
                Constraint::Range { lo: a.max(c), hi: b.min(d) }
            }
            (Constraint::Categories(a), Constraint::Categories(b)) => Constraint::Categories(a & b),
            _ => panic!("intersecting constraints of different feature kinds"),
        }
    }

    /// Lowest allowed coordinate / category.
    fn first(&self) -> u32 {
        match *self {
            Constraint::Range { lo, .. } => lo,
            Constraint::Categories(mask) => mask.trailing_zeros(),
        }
    }

    fn allows(&self, value: u32) -> bool {
        match *self {
            Constraint::Range { lo, hi } => lo <= value && value <= hi,
            Constraint::Categories(mask) => value < 64 && mask & (1u64 << value) != 0,
        }
    }
}

/// Which side of a threshold test `z[axis] <= threshold` a region lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `z[axis] <= threshold`
    Left,
    /// `z[axis] > threshold`
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// One boundary recovered by [`Region::split`]: the test `z[axis] <= threshold`
/// with the query point lying on `query_side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitRecord {
    pub axis: usize,
    pub threshold: u32,
    pub query_side: Side,
}

/// Result of peeling a region along a query/counterfactual pair.
///
/// `pieces[i]` is the query-side piece cut off by `records[i]`; the last piece
/// is the remainder that holds the counterfactual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitOutcome {
    pub pieces: Vec<Region>,
    pub records: Vec<SplitRecord>,
}

/// A product of per-feature constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    constraints: Vec<Constraint>,
}

impl Region {
    pub fn from_constraints(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, feature: usize) -> Constraint {
        self.constraints[feature]
    }

    pub fn set_constraint(&mut self, feature: usize, c: Constraint) {
        self.constraints[feature] = c;
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.iter().any(Constraint::is_empty)
    }

    /// Exact number of grid points in the region.
    pub fn grid_volume(&self) -> u128 {
        self.constraints.iter().map(Constraint::size).product()
    }

    pub fn contains(&self, schema: &FeatureSchema, point: &Point) -> bool {
        (0..schema.n_features()).all(|f| self.constraints[f].allows(schema.feature_value(point, f)))
    }

    /// Intersection, or `None` when it is empty.
    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let constraints: Vec<_> = self.constraints.iter().zip(&other.constraints).map(|(a, b)| a.intersect(b)).collect();
        let r = Region { constraints };
        (!r.is_empty()).then_some(r)
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.intersect(other).is_some_and(|i| i == *self)
    }

    /// Part of the region on `side` of `z[axis] <= threshold` (possibly empty).
    pub fn restrict(&self, schema: &FeatureSchema, axis: usize, threshold: u32, side: Side) -> Region {
        let f = schema.feature_of_axis(axis);
        let mut out = self.clone();
        out.constraints[f] = match self.constraints[f] {
            Constraint::Range { lo, hi } => match side {
                Side::Left => Constraint::Range { lo, hi: hi.min(threshold) },
                Side::Right => Constraint::Range { lo: lo.max(threshold.saturating_add(1)), hi },
            },
            Constraint::Categories(mask) => {
                let bit = 1u64 << (axis - schema.axes_of(f).start);
                // one-hot axes only take 0/1, so any threshold >= 1 keeps everything left
                match (side, threshold) {
                    (Side::Left, 0) => Constraint::Categories(mask & !bit),
                    (Side::Right, 0) => Constraint::Categories(mask & bit),
                    (Side::Left, _) => Constraint::Categories(mask),
                    (Side::Right, _) => Constraint::Categories(0),
                }
            }
        };
        out
    }

    /// True when the test `z[axis] <= threshold` separates two points of the region.
    pub fn straddles(&self, schema: &FeatureSchema, axis: usize, threshold: u32) -> bool {
        self.side_of(schema, axis, threshold).is_none()
    }

    /// The side of `z[axis] <= threshold` holding the whole (non-empty) region,
    /// or `None` when the test cuts it.
    pub fn side_of(&self, schema: &FeatureSchema, axis: usize, threshold: u32) -> Option<Side> {
        let f = schema.feature_of_axis(axis);
        match self.constraints[f] {
            Constraint::Range { lo, hi } => {
                if hi <= threshold {
                    Some(Side::Left)
                } else if lo > threshold {
                    Some(Side::Right)
                } else {
                    None
                }
            }
            Constraint::Categories(mask) => {
                let bit = 1u64 << (axis - schema.axes_of(f).start);
                if threshold >= 1 || mask & bit == 0 {
                    Some(Side::Left)
                } else if mask == bit {
                    Some(Side::Right)
                } else {
                    None
                }
            }
        }
    }

    /// Deterministic query point of the region.
    ///
    /// Interval features take the midpoint rounded down to the grid,
    /// categorical features their lowest allowed category.
    pub fn center(&self, schema: &FeatureSchema) -> Result<Point> {
        if self.is_empty() {
            return Err(contract!("center of an empty region"));
        }
        let values: Vec<u32> = self
            .constraints
            .iter()
            .map(|c| match *c {
                Constraint::Range { lo, hi } => lo + (hi - lo) / 2,
                Constraint::Categories(mask) => mask.trailing_zeros(),
            })
            .collect();
        schema.encode(&values)
    }

    /// Lowest corner (lowest coordinate and category on every feature).
    pub fn low_corner(&self, schema: &FeatureSchema) -> Point {
        let values: Vec<u32> = self.constraints.iter().map(Constraint::first).collect();
        schema.encode(&values).expect("non-empty region has an in-range corner")
    }

    /// Point of the region nearest to `x` under any separable distance that
    /// grows with per-axis displacement.
    ///
    /// Interval features are clamped. A categorical feature keeps the category
    /// of `x` when allowed; otherwise every allowed category is equally far and
    /// the highest one is chosen, which yields the lexicographically smallest
    /// one-hot encoding.
    pub fn project(&self, schema: &FeatureSchema, x: &Point) -> Point {
        let values: Vec<u32> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(f, c)| {
                let v = schema.feature_value(x, f);
                match *c {
                    Constraint::Range { lo, hi } => v.clamp(lo, hi),
                    Constraint::Categories(mask) => {
                        if c.allows(v) {
                            v
                        } else {
                            63 - mask.leading_zeros()
                        }
                    }
                }
            })
            .collect();
        schema.encode(&values).expect("projection stays in range")
    }

    /// Uniform draw over the grid points of the region.
    pub fn sample<R: Rng + ?Sized>(&self, schema: &FeatureSchema, rng: &mut R) -> Point {
        let values: Vec<u32> = self
            .constraints
            .iter()
            .map(|c| match *c {
                Constraint::Range { lo, hi } => rng.gen_range(lo..=hi),
                Constraint::Categories(mask) => {
                    let mut nth = rng.gen_range(0..mask.count_ones());
                    let mut m = mask;
                    loop {
                        let bit = m.trailing_zeros();
                        if nth == 0 {
                            break bit;
                        }
                        nth -= 1;
                        m &= m - 1;
                    }
                }
            })
            .collect();
        schema.encode(&values).expect("sample stays in range")
    }

    /// Peels the region along the axes where `x` and `x_cf` differ.
    ///
    /// Axes are visited in ascending order. For a counterfactual value `v`
    /// below `x` the query side is `z >= v + 1` and the recorded threshold is
    /// `v`; above `x` the query side is `z <= v - 1` with threshold `v - 1`.
    /// Query-side pieces that would be empty (possible inside a one-hot group)
    /// are skipped.
    pub fn split(&self, schema: &FeatureSchema, x: &Point, x_cf: &Point) -> Result<SplitOutcome> {
        if !self.contains(schema, x) {
            return Err(contract!("split: query point outside region"));
        }
        if !self.contains(schema, x_cf) {
            return Err(contract!("split: counterfactual outside region"));
        }
        if x == x_cf {
            return Err(contract!("split: counterfactual equals the query point"));
        }
        let mut remainder = self.clone();
        let mut pieces = Vec::new();
        let mut records = Vec::new();
        for axis in x.differing_axes(x_cf) {
            let (xi, v) = (x.get(axis), x_cf.get(axis));
            let record = if v < xi {
                SplitRecord { axis, threshold: v, query_side: Side::Right }
            } else {
                SplitRecord { axis, threshold: v - 1, query_side: Side::Left }
            };
            let peeled = remainder.restrict(schema, axis, record.threshold, record.query_side);
            if peeled.is_empty() {
                continue;
            }
            remainder = remainder.restrict(schema, axis, record.threshold, record.query_side.flip());
            pieces.push(peeled);
            records.push(record);
        }
        pieces.push(remainder);
        Ok(SplitOutcome { pieces, records })
    }
}

/// Grid volume of `region`, checked against the schema's feature kinds.
pub fn grid_volume(region: &Region, schema: &FeatureSchema) -> Result<u128> {
    if region.constraints.len() != schema.n_features() {
        return Err(contract!("region arity does not match the schema"));
    }
    for (c, f) in region.constraints.iter().zip(schema.features()) {
        let ok = matches!(
            (c, f.kind),
            (Constraint::Categories(_), FeatureKind::Categorical { .. })
                | (Constraint::Range { .. }, FeatureKind::Numeric { .. })
                | (Constraint::Range { .. }, FeatureKind::Ordinal { .. })
                | (Constraint::Range { .. }, FeatureKind::Binary)
        );
        if !ok {
            return Err(contract!("constraint kind does not match feature `{}`", f.name));
        }
    }
    Ok(region.grid_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Feature;
    use alloc::vec;

    const D: u32 = 1024;

    fn unit2() -> FeatureSchema {
        FeatureSchema::unit_cube(2, 1.0 / D as f64).unwrap()
    }

    fn range(lo: u32, hi: u32) -> Constraint {
        Constraint::Range { lo, hi }
    }

    #[test]
    fn center_of_unit_square() {
        let s = unit2();
        let c = s.full_region().center(&s).unwrap();
        assert_eq!(s.axis_value(0, c.get(0)), 0.5);
        assert_eq!(s.axis_value(1, c.get(1)), 0.5);
    }

    #[test]
    fn center_degenerate_and_shifted() {
        let s = unit2();
        let r = Region::from_constraints(vec![range(7, 7), range(900, 900)]);
        assert_eq!(r.center(&s).unwrap().coords(), &[7, 900]);
        // [0,1] x [0.4 + delta, 1]: 0.4 sits between grid points 409 and 410.
        let r = Region::from_constraints(vec![range(0, D), range(410, D)]);
        let c = r.center(&s).unwrap();
        assert_eq!(c.coords(), &[512, 717]);
        let y = s.axis_value(1, c.get(1));
        assert!((y - 0.7002).abs() < 1e-4 && y <= 0.7 + 0.5 / D as f64);
    }

    #[test]
    fn center_of_empty_region_fails() {
        let s = unit2();
        let r = Region::from_constraints(vec![range(3, 2), range(0, 1)]);
        assert!(r.center(&s).is_err());
    }

    #[test]
    fn split_single_axis() {
        let s = FeatureSchema::unit_cube(2, 0.001).unwrap();
        let full = s.full_region();
        let x = Point::new(vec![500, 500]);
        let cf = Point::new(vec![500, 400]);
        let out = full.split(&s, &x, &cf).unwrap();
        assert_eq!(out.pieces.len(), 2);
        assert_eq!(out.records, vec![SplitRecord { axis: 1, threshold: 400, query_side: Side::Right }]);
        assert_eq!(out.pieces[0].constraint(1), range(401, 1000));
        assert_eq!(out.pieces[1].constraint(1), range(0, 400));
    }

    #[test]
    fn split_two_axes() {
        let s = FeatureSchema::unit_cube(2, 0.1).unwrap();
        let full = s.full_region();
        let x = Point::new(vec![2, 2]);
        let cf = Point::new(vec![6, 7]);
        let out = full.split(&s, &x, &cf).unwrap();
        assert_eq!(out.pieces.len(), 3);
        assert_eq!(out.pieces[0].constraints(), &[range(0, 5), range(0, 10)]);
        assert_eq!(out.pieces[1].constraints(), &[range(6, 10), range(0, 6)]);
        assert_eq!(out.pieces[2].constraints(), &[range(6, 10), range(7, 10)]);
        assert_eq!(out.records[0].threshold, 5);
        assert_eq!(out.records[1].threshold, 6);
    }

    #[test]
    fn split_contract_errors() {
        let s = unit2();
        let r = Region::from_constraints(vec![range(0, 10), range(0, 10)]);
        let x = Point::new(vec![5, 5]);
        assert!(r.split(&s, &x, &x).is_err());
        assert!(r.split(&s, &x, &Point::new(vec![50, 5])).is_err());
        assert!(r.split(&s, &Point::new(vec![50, 5]), &x).is_err());
    }

    #[test]
    fn one_hot_split_is_a_membership_split() {
        let s = FeatureSchema::new(vec![Feature::categorical("c", 4)]).unwrap();
        let full = s.full_region();
        let x = s.encode(&[1]).unwrap();
        let cf = s.encode(&[3]).unwrap();
        let out = full.split(&s, &x, &cf).unwrap();
        let masks: Vec<_> = out.pieces.iter().map(|p| p.constraint(0)).collect();
        assert_eq!(masks, vec![Constraint::Categories(0b0010), Constraint::Categories(0b0101), Constraint::Categories(0b1000)]);
        // two categories only: the middle piece would be empty and is skipped
        let s2 = FeatureSchema::new(vec![Feature::categorical("c", 2)]).unwrap();
        let out = s2.full_region().split(&s2, &s2.encode(&[0]).unwrap(), &s2.encode(&[1]).unwrap()).unwrap();
        assert_eq!(out.pieces.len(), 2);
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn volumes() {
        let s = FeatureSchema::new(vec![Feature::numeric("x", 0.0, 1.0, 0.25)]).unwrap();
        assert_eq!(grid_volume(&s.full_region(), &s).unwrap(), 5);
        let s = FeatureSchema::new(vec![Feature::numeric("x", 0.0, 1.0, 0.25), Feature::binary("b")]).unwrap();
        let r = Region::from_constraints(vec![range(0, 2), range(0, 1)]);
        assert_eq!(grid_volume(&r, &s).unwrap(), 6);
        let a = Region::from_constraints(vec![range(0, 1), range(0, 1)]);
        let b = Region::from_constraints(vec![range(3, 4), range(0, 1)]);
        assert!(a.intersect(&b).is_none());
        assert_eq!(Region::from_constraints(vec![range(3, 2), range(0, 1)]).grid_volume(), 0);
        assert!(grid_volume(&Region::from_constraints(vec![Constraint::Categories(1), range(0, 1)]), &s).is_err());
    }

    #[test]
    fn projection_clamps_and_picks_category() {
        let s = FeatureSchema::new(vec![Feature::ordinal("o", 10), Feature::categorical("c", 3)]).unwrap();
        let r = Region::from_constraints(vec![range(4, 6), Constraint::Categories(0b011)]);
        let x = s.encode(&[9, 2]).unwrap();
        let p = r.project(&s, &x);
        assert_eq!(s.decode(&p), vec![6, 1]);
        let x = s.encode(&[5, 0]).unwrap();
        assert_eq!(r.project(&s, &x), x);
    }
}
