//! Functionally-equivalent extraction of axis-parallel classifiers through
//! counterfactual-explanation oracles.
//!
//! Everything in this crate works on a quantized input space: numeric
//! features carry an explicit grid step, so points are vectors of integer
//! grid coordinates and every comparison (membership, equivalence, oracle
//! optimality) is exact.
//!
//! The crate is `#![no_std]` and only needs `alloc`. File formats, dataset
//! ingestion and the command line live in the `tra-lab` companion crate.
//!
//! Module map:
//!
//! * [`schema`] and [`region`]: the feature space, points and axis-aligned regions.
//! * [`model`]: decision trees, majority-vote forests and their structure.
//! * [`oracle`]: the metered prediction + counterfactual API (exact and heuristic).
//! * [`tra`]: the tree reconstruction attack.
//! * [`baselines`]: PathFinding, CF and DualCF.
//! * [`cart`]: Gini tree induction, bagged forests, cost-complexity pruning.
//! * [`eval`] and [`bounds`]: equivalence, fidelity, anytime curves, query bounds.
//! * [`generate`]: synthetic targets (random, chessboard, adversarial).

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod bounds;
pub mod cart;
pub mod error;
pub mod eval;
pub mod generate;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod region;
pub mod schema;
pub mod tra;

pub use error::{Error, Result};
pub use model::{Classifier, ForestModel, Label, Model, ModelStats, Node, Split, TreeModel};
pub use region::{Constraint, Region, SplitRecord};
pub use schema::{Feature, FeatureKind, FeatureSchema, Point};
