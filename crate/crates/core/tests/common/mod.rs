#![allow(dead_code)]

use rand::Rng;
use tra_core::region::Constraint;
use tra_core::{Feature, FeatureSchema, Point, Region};

/// Every grid point of the schema.
pub fn all_points(schema: &FeatureSchema) -> Vec<Point> {
    let cards: Vec<u32> = (0..schema.n_features()).map(|f| schema.cardinality(f)).collect();
    let mut out = Vec::new();
    let mut values = vec![0u32; cards.len()];
    loop {
        out.push(schema.encode(&values).unwrap());
        let mut f = 0;
        loop {
            if f == cards.len() {
                return out;
            }
            values[f] += 1;
            if values[f] < cards[f] {
                break;
            }
            values[f] = 0;
            f += 1;
        }
    }
}

/// Random non-empty sub-box of the domain.
pub fn random_region<R: Rng>(schema: &FeatureSchema, rng: &mut R) -> Region {
    let full = schema.full_region();
    let cs = full
        .constraints()
        .iter()
        .map(|c| match *c {
            Constraint::Range { lo, hi } => {
                let a = rng.gen_range(lo..=hi);
                let b = rng.gen_range(lo..=hi);
                Constraint::Range { lo: a.min(b), hi: a.max(b) }
            }
            Constraint::Categories(mask) => {
                let sub = mask & rng.gen::<u64>();
                Constraint::Categories(if sub == 0 { 1u64 << mask.trailing_zeros() } else { sub })
            }
        })
        .collect();
    Region::from_constraints(cs)
}

/// Small schemas with at most three axes.
pub fn small_schemas() -> Vec<FeatureSchema> {
    vec![
        FeatureSchema::unit_cube(2, 1.0 / 16.0).unwrap(),
        FeatureSchema::unit_cube(3, 1.0 / 8.0).unwrap(),
        FeatureSchema::new(vec![Feature::numeric("a", 0.0, 2.0, 0.125), Feature::binary("b"), Feature::ordinal("c", 6)]).unwrap(),
        FeatureSchema::new(vec![Feature::categorical("c", 2), Feature::numeric("x", -1.0, 1.0, 0.0625)]).unwrap(),
        FeatureSchema::new(vec![Feature::categorical("c", 3)]).unwrap(),
        FeatureSchema::unit_cube(1, 1.0 / 63.0).unwrap(),
    ]
}

/// Schemas mixing every feature kind, 2 to 8 axes.
pub fn mixed_schemas() -> Vec<FeatureSchema> {
    vec![
        FeatureSchema::unit_cube(2, 1.0 / 1024.0).unwrap(),
        FeatureSchema::new(vec![Feature::numeric("a", 0.0, 1.0, 0.01), Feature::binary("b"), Feature::ordinal("c", 7)]).unwrap(),
        FeatureSchema::new(vec![
            Feature::categorical("c", 3),
            Feature::numeric("x", -5.0, 5.0, 0.5),
            Feature::ordinal("o", 4),
        ])
        .unwrap(),
        FeatureSchema::new(vec![
            Feature::numeric("a", 0.0, 100.0, 1.0),
            Feature::binary("b"),
            Feature::categorical("c", 4),
            Feature::numeric("d", 0.0, 1.0, 1.0 / 256.0),
            Feature::binary("e"),
        ])
        .unwrap(),
    ]
}
