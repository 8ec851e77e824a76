use super::Distance;
use crate::model::Model;
use crate::schema::{FeatureSchema, Point};

/// Local optimality of a counterfactual, probed at one grid step.
///
/// Every single-feature move of `x_cf` by one grid step (or to another
/// category) must either give back the label of `x`, not bring the point
/// closer to `x`, or leave the domain. Returns false when `x_cf` is not a
/// counterfactual of `x` at all.
pub fn verify_local_optimality(schema: &FeatureSchema, target: &Model, x: &Point, x_cf: &Point, d: Distance) -> bool {
    let label = target.predict(x);
    if target.predict(x_cf) == label {
        return false;
    }
    let base = d.between(schema, x, x_cf);
    let ok = |p: &Point| target.predict(p) == label || d.between(schema, x, p) >= base;
    for f in 0..schema.n_features() {
        let v = schema.feature_value(x_cf, f);
        let card = schema.cardinality(f);
        let mut probe = x_cf.clone();
        let moves: alloc::vec::Vec<u32> = if schema.feature(f).is_categorical() {
            (0..card).filter(|&c| c != v).collect()
        } else {
            [v.checked_sub(1), (v + 1 < card).then_some(v + 1)].into_iter().flatten().collect()
        };
        for m in moves {
            schema.set_feature_value(&mut probe, f, m);
            if !ok(&probe) {
                return false;
            }
        }
    }
    true
}
