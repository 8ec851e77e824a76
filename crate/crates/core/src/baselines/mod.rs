//! Comparison attacks: PathFinding over a leaf-identifier API, and the CF and
//! DualCF surrogate attacks over the counterfactual API.

mod pathfinding;
mod surrogate;

pub use pathfinding::{pathfinding_extract, LeafIdOracle, PathFindingRun};
pub use surrogate::{cf_attack, dualcf_attack, AttackBudget, SurrogateRun, SurrogateSnapshot, SurrogateSpec};
