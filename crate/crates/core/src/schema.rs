//! The quantized input space.
//!
//! A [`FeatureSchema`] is an ordered list of features. Each feature owns one
//! or more axes: numeric, ordinal and binary features own a single axis, a
//! categorical feature with `k` categories owns `k` one-hot axes. A
//! [`Point`] stores one integer grid coordinate per axis.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::region::{Constraint, Region};

/// Largest category count a categorical feature may declare.
pub const MAX_CATEGORIES: u32 = 64;

const GRID_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureKind {
    /// Real values `lo, lo + delta, ..., hi`.
    Numeric { lo: f64, hi: f64, delta: f64 },
    /// Integer levels `0..levels`.
    Ordinal { levels: u32 },
    Binary,
    /// One-hot group of `k` axes.
    Categorical { k: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self { name: name.into(), kind }
    }

    pub fn numeric(name: impl Into<String>, lo: f64, hi: f64, delta: f64) -> Self {
        Self::new(name, FeatureKind::Numeric { lo, hi, delta })
    }

    pub fn ordinal(name: impl Into<String>, levels: u32) -> Self {
        Self::new(name, FeatureKind::Ordinal { levels })
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Binary)
    }

    pub fn categorical(name: impl Into<String>, k: u32) -> Self {
        Self::new(name, FeatureKind::Categorical { k })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    first_axis: usize,
    axes: usize,
    /// Grid points for interval features, categories for categorical ones.
    cardinality: u32,
}

/// Ordered, validated list of features with its axis layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    layout: Vec<Layout>,
    axis_owner: Vec<usize>,
    total_volume: u128,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut layout = Vec::with_capacity(features.len());
        let mut axis_owner = Vec::new();
        let mut total: u128 = 1;
        for (index, feature) in features.iter().enumerate() {
            let (axes, cardinality) = match feature.kind {
                FeatureKind::Numeric { lo, hi, delta } => (1, numeric_points(&feature.name, lo, hi, delta)?),
                FeatureKind::Ordinal { levels } => {
                    if levels < 2 {
                        return Err(Error::Schema(alloc::format!(
                            "ordinal feature `{}` needs at least 2 levels",
                            feature.name
                        )));
                    }
                    (1, levels)
                }
                FeatureKind::Binary => (1, 2),
                FeatureKind::Categorical { k } => {
                    if !(2..=MAX_CATEGORIES).contains(&k) {
                        return Err(Error::Schema(alloc::format!(
                            "categorical feature `{}` needs between 2 and {MAX_CATEGORIES} categories",
                            feature.name
                        )));
                    }
                    (k as usize, k)
                }
            };
            total = total.checked_mul(cardinality as u128).ok_or_else(|| {
                Error::Schema("grid volume of the schema does not fit in 128 bits".into())
            })?;
            layout.push(Layout { first_axis: axis_owner.len(), axes, cardinality });
            axis_owner.extend(core::iter::repeat_n(index, axes));
        }
        Ok(Self { features, layout, axis_owner, total_volume: total })
    }

    /// `[0,1]^m` with grid step `delta`, all numeric.
    pub fn unit_cube(m: usize, delta: f64) -> Result<Self> {
        Self::new((0..m).map(|i| Feature::numeric(alloc::format!("x{}", i + 1), 0.0, 1.0, delta)).collect())
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &Feature {
        &self.features[index]
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Total axis count `m`, one-hot groups contributing one axis per category.
    pub fn n_axes(&self) -> usize {
        self.axis_owner.len()
    }

    pub fn axes_of(&self, feature: usize) -> Range<usize> {
        let l = self.layout[feature];
        l.first_axis..l.first_axis + l.axes
    }

    pub fn feature_of_axis(&self, axis: usize) -> usize {
        self.axis_owner[axis]
    }

    /// Grid points of an interval feature, or category count of a categorical one.
    pub fn cardinality(&self, feature: usize) -> u32 {
        self.layout[feature].cardinality
    }

    /// Number of distinct coordinate values an axis can take.
    pub fn axis_cardinality(&self, axis: usize) -> u32 {
        let f = self.axis_owner[axis];
        if self.features[f].is_categorical() {
            2
        } else {
            self.layout[f].cardinality
        }
    }

    /// Number of grid points in the whole domain.
    pub fn total_volume(&self) -> u128 {
        self.total_volume
    }

    pub fn full_region(&self) -> Region {
        Region::from_constraints(
            self.features
                .iter()
                .zip(&self.layout)
                .map(|(f, l)| match f.kind {
                    FeatureKind::Categorical { k } => Constraint::Categories(full_mask(k)),
                    _ => Constraint::Range { lo: 0, hi: l.cardinality - 1 },
                })
                .collect(),
        )
    }

    /// Real value of a coordinate on an interval axis.
    pub fn axis_value(&self, axis: usize, coord: u32) -> f64 {
        match self.features[self.axis_owner[axis]].kind {
            FeatureKind::Numeric { lo, delta, .. } => lo + coord as f64 * delta,
            _ => coord as f64,
        }
    }

    /// Grid coordinate of a real value on `axis`; fails when the value is off-grid.
    pub fn axis_coord(&self, axis: usize, value: f64) -> Result<u32> {
        let card = self.axis_cardinality(axis);
        let raw = match self.features[self.axis_owner[axis]].kind {
            FeatureKind::Numeric { lo, delta, .. } => (value - lo) / delta,
            _ => value,
        };
        let rounded = libm::round(raw);
        if !raw.is_finite() || libm::fabs(raw - rounded) > GRID_TOLERANCE || rounded < 0.0 || rounded >= card as f64 {
            return Err(Error::Contract(alloc::format!("value {value} is not a grid point of axis {axis}")));
        }
        Ok(rounded as u32)
    }

    /// Nearest grid coordinate of a real value, clamped to the axis bounds.
    pub fn snap(&self, axis: usize, value: f64) -> u32 {
        let card = self.axis_cardinality(axis);
        let raw = match self.features[self.axis_owner[axis]].kind {
            FeatureKind::Numeric { lo, delta, .. } => (value - lo) / delta,
            _ => value,
        };
        let rounded = libm::round(raw);
        if !(rounded > 0.0) {
            0
        } else if rounded >= (card - 1) as f64 {
            card - 1
        } else {
            rounded as u32
        }
    }

    /// Builds a point from one value per feature (grid index, level, bit or category).
    pub fn encode(&self, values: &[u32]) -> Result<Point> {
        if values.len() != self.n_features() {
            return Err(Error::Contract(alloc::format!(
                "expected {} feature values, got {}",
                self.n_features(),
                values.len()
            )));
        }
        let mut coords = alloc::vec![0u32; self.n_axes()];
        for (f, &v) in values.iter().enumerate() {
            let l = self.layout[f];
            if v >= l.cardinality {
                return Err(Error::Contract(alloc::format!("value {v} out of range for feature {f}")));
            }
            if self.features[f].is_categorical() {
                coords[l.first_axis + v as usize] = 1;
            } else {
                coords[l.first_axis] = v;
            }
        }
        Ok(Point::new(coords))
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, point: &Point) -> Vec<u32> {
        (0..self.n_features()).map(|f| self.feature_value(point, f)).collect()
    }

    /// Grid index / level / bit / active category of one feature.
    pub fn feature_value(&self, point: &Point, feature: usize) -> u32 {
        let l = self.layout[feature];
        if self.features[feature].is_categorical() {
            point.coords()[l.first_axis..l.first_axis + l.axes]
                .iter()
                .position(|&c| c == 1)
                .unwrap_or(0) as u32
        } else {
            point.coords()[l.first_axis]
        }
    }

    /// Overwrites one feature of `point` (category index for categorical features).
    pub fn set_feature_value(&self, point: &mut Point, feature: usize, value: u32) {
        let l = self.layout[feature];
        if self.features[feature].is_categorical() {
            for a in 0..l.axes {
                point.coords[l.first_axis + a] = u32::from(a as u32 == value);
            }
        } else {
            point.coords[l.first_axis] = value;
        }
    }

    /// Checks arity, bounds and one-hot validity.
    pub fn validate_point(&self, point: &Point) -> Result<()> {
        if point.len() != self.n_axes() {
            return Err(Error::Contract(alloc::format!(
                "point has {} axes, schema has {}",
                point.len(),
                self.n_axes()
            )));
        }
        for (f, feature) in self.features.iter().enumerate() {
            let l = self.layout[f];
            let slice = &point.coords()[l.first_axis..l.first_axis + l.axes];
            if feature.is_categorical() {
                if slice.iter().any(|&c| c > 1) || slice.iter().filter(|&&c| c == 1).count() != 1 {
                    return Err(Error::Contract(alloc::format!(
                        "one-hot group `{}` must have exactly one active axis",
                        feature.name
                    )));
                }
            } else if slice[0] >= l.cardinality {
                return Err(Error::Contract(alloc::format!("feature `{}` out of bounds", feature.name)));
            }
        }
        Ok(())
    }

    /// Width used to normalize coordinate differences on an interval feature.
    pub(crate) fn span(&self, feature: usize) -> f64 {
        (self.layout[feature].cardinality - 1) as f64
    }
}

fn numeric_points(name: &str, lo: f64, hi: f64, delta: f64) -> Result<u32> {
    if !(lo.is_finite() && hi.is_finite() && delta.is_finite()) || lo >= hi || delta <= 0.0 {
        return Err(Error::Schema(alloc::format!(
            "numeric feature `{name}` needs finite lo < hi and delta > 0"
        )));
    }
    let steps = (hi - lo) / delta;
    let rounded = libm::round(steps);
    if rounded < 1.0 || libm::fabs(steps - rounded) > GRID_TOLERANCE * rounded.max(1.0) {
        return Err(Error::Schema(alloc::format!(
            "numeric feature `{name}`: (hi - lo) / delta must be a positive integer"
        )));
    }
    if rounded >= (u32::MAX / 4) as f64 {
        return Err(Error::Schema(alloc::format!("numeric feature `{name}`: grid too fine")));
    }
    Ok(rounded as u32 + 1)
}

pub(crate) fn full_mask(k: u32) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// One grid coordinate per axis.
///
/// The derived ordering is lexicographic over the coordinates, which is the
/// tie-break used among co-optimal counterfactuals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    coords: Vec<u32>,
}

impl Point {
    pub fn new(coords: Vec<u32>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, axis: usize) -> u32 {
        self.coords[axis]
    }

    pub fn set(&mut self, axis: usize, value: u32) {
        self.coords[axis] = value;
    }

    /// Axes on which the two points differ, ascending.
    pub fn differing_axes<'a>(&'a self, other: &'a Point) -> impl Iterator<Item = usize> + 'a {
        self.coords.iter().zip(&other.coords).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i)
    }
}

impl From<Vec<u32>> for Point {
    fn from(coords: Vec<u32>) -> Self {
        Self::new(coords)
    }
}
