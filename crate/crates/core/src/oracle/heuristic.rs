use rand::Rng;

use crate::error::{contract, Result};
use crate::model::{Label, Model};
use crate::region::Region;
use crate::schema::{FeatureSchema, Point};

/// Sampling search for a locally optimal counterfactual.
///
/// Scans `training_data` for a point of `region` with another label, then
/// falls back to up to `samples` uniform draws from the region. The first hit
/// is refined with [`line_search`]. `None` only means the search failed.
pub fn heuristic_cf<R: Rng + ?Sized>(
    schema: &FeatureSchema,
    target: &Model,
    x: &Point,
    region: &Region,
    training_data: &[Point],
    samples: usize,
    rng: &mut R,
) -> Option<Point> {
    let label = target.predict(x);
    let hit = training_data
        .iter()
        .find(|p| region.contains(schema, p) && target.predict(p) != label)
        .cloned()
        .or_else(|| {
            (0..samples).map(|_| region.sample(schema, rng)).find(|p| target.predict(p) != label)
        })?;
    Some(refine(schema, target, x, hit, label))
}

/// Moves each coordinate of `candidate` toward `x` while the label stays
/// different from `x`'s, until no single one-step move toward `x` keeps it.
///
/// Interval features are bisected on the grid between the current value and
/// `x`'s value; a categorical feature tries `x`'s category. Features are
/// visited in ascending order, repeatedly, until a full pass changes nothing.
pub fn line_search(schema: &FeatureSchema, target: &Model, x: &Point, candidate: &Point) -> Result<Point> {
    let label = target.predict(x);
    if target.predict(candidate) == label {
        return Err(contract!("line search needs a candidate with a different label"));
    }
    Ok(refine(schema, target, x, candidate.clone(), label))
}

fn refine(schema: &FeatureSchema, target: &Model, x: &Point, mut cur: Point, label: Label) -> Point {
    let flipped = |p: &Point| target.predict(p) != label;
    loop {
        let mut changed = false;
        for f in 0..schema.n_features() {
            let goal = schema.feature_value(x, f);
            let start = schema.feature_value(&cur, f);
            if start == goal {
                continue;
            }
            let mut probe = cur.clone();
            if schema.feature(f).is_categorical() {
                schema.set_feature_value(&mut probe, f, goal);
                if flipped(&probe) {
                    cur = probe;
                    changed = true;
                }
                continue;
            }
            schema.set_feature_value(&mut probe, f, goal);
            if flipped(&probe) {
                cur = probe;
                changed = true;
                continue;
            }
            // flipped at `good`, not flipped at `bad`
            let (mut good, mut bad) = (start, goal);
            while good.abs_diff(bad) > 1 {
                let mid = if good < bad { good + (bad - good) / 2 } else { bad + (good - bad).div_ceil(2) };
                schema.set_feature_value(&mut probe, f, mid);
                if flipped(&probe) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            if good != start {
                schema.set_feature_value(&mut cur, f, good);
                changed = true;
            }
        }
        if !changed {
            return cur;
        }
    }
}
