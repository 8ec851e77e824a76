//! Exact equivalence checking, sampled fidelity and anytime curves.

use alloc::vec::Vec;
use core::ops::ControlFlow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::generate::uniform_points;
use crate::model::{vote, Classifier, Model, TreeModel};
use crate::partition::for_each_constant_piece;
use crate::schema::{FeatureSchema, Point};

/// Default limit on the pieces an equivalence check may visit.
pub const DEFAULT_PIECE_CAP: usize = 10_000_000;

/// Default number of uniform evaluation points.
pub const DEFAULT_SAMPLES: usize = 3000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// A grid point where the models disagree.
    pub witness: Option<Point>,
    /// Constant pieces visited.
    pub pieces: usize,
}

/// Decides whether `f` and `g` agree on every grid point of the domain.
///
/// The domain is refined along the tests of both models until every model
/// tree is constant on each piece; one representative per piece then settles
/// the question exactly.
pub fn functional_equivalence(schema: &FeatureSchema, f: &Model, g: &Model, cap: usize) -> Result<Equivalence> {
    let trees: Vec<&TreeModel> = f.trees().iter().chain(g.trees()).collect();
    let split = f.trees().len();
    let mut witness = None;
    let pieces = for_each_constant_piece(schema, &trees, schema.full_region(), cap, |piece, labels| {
        if vote(labels[..split].iter().copied()) == vote(labels[split..].iter().copied()) {
            ControlFlow::Continue(())
        } else {
            witness = Some(piece.low_corner(schema));
            ControlFlow::Break(())
        }
    })?;
    Ok(Equivalence { equivalent: witness.is_none(), witness, pieces })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityKind {
    UniformGrid,
    TestSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub sample_count: usize,
    pub seed: Option<u64>,
    pub kind: FidelityKind,
}

/// Share of `points` on which `surrogate` returns the target's label.
/// An unknown surrogate label counts as disagreement.
pub fn agreement<T: Classifier + ?Sized, S: Classifier + ?Sized>(target: &T, surrogate: &S, points: &[Point]) -> f64 {
    if points.is_empty() {
        return 1.0;
    }
    let hits = points.iter().filter(|p| surrogate.classify(p).is_some() && surrogate.classify(p) == target.classify(p)).count();
    hits as f64 / points.len() as f64
}

/// Agreement on `n_samples` seeded uniform grid points.
pub fn fidelity<T: Classifier + ?Sized, S: Classifier + ?Sized>(
    schema: &FeatureSchema,
    target: &T,
    surrogate: &S,
    n_samples: usize,
    seed: u64,
) -> FidelityReport {
    let points = uniform_points(schema, n_samples, &mut ChaCha8Rng::seed_from_u64(seed));
    FidelityReport {
        fidelity: agreement(target, surrogate, &points),
        sample_count: n_samples,
        seed: Some(seed),
        kind: FidelityKind::UniformGrid,
    }
}

/// Agreement on a fixed evaluation set.
pub fn fidelity_on<T: Classifier + ?Sized, S: Classifier + ?Sized>(target: &T, surrogate: &S, points: &[Point]) -> FidelityReport {
    FidelityReport {
        fidelity: agreement(target, surrogate, points),
        sample_count: points.len(),
        seed: None,
        kind: FidelityKind::TestSet,
    }
}

/// `(queries, fidelity)` of each snapshot model on `points`.
pub fn run_curve<'a, T, S, I>(target: &T, snapshots: I, points: &[Point]) -> Vec<(u64, f64)>
where
    T: Classifier + ?Sized,
    S: Classifier + 'a,
    I: IntoIterator<Item = (u64, &'a S)>,
{
    snapshots.into_iter().map(|(q, m)| (q, agreement(target, m, points))).collect()
}

/// Step-function value of a curve at `q`: the last checkpoint at or before `q`.
fn value_at(curve: &[(u64, f64)], q: u64) -> f64 {
    curve.iter().take_while(|(cq, _)| *cq <= q).last().map_or(0.0, |(_, v)| *v)
}

/// Mean fidelity over runs at checkpoints `0, every, 2 every, ...` up to the
/// longest run.
///
/// Every run is read as a step function of the query count, so runs whose
/// snapshots sit at other counts are resampled onto the common grid; a run
/// that stopped early keeps its final fidelity.
pub fn anytime_fidelity(runs: &[Vec<(u64, f64)>], every: u64) -> Vec<(u64, f64)> {
    let every = every.max(1);
    let end = runs.iter().filter_map(|r| r.last().map(|(q, _)| *q)).max();
    let Some(end) = end else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut q = 0;
    loop {
        let mean = runs.iter().map(|r| value_at(r, q)).sum::<f64>() / runs.len() as f64;
        out.push((q, mean));
        if q >= end {
            return out;
        }
        q = (q + every).min(end.div_ceil(every) * every);
    }
}
