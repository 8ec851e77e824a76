//! Adaptive partition of a region into pieces on which a set of trees is
//! constant.
//!
//! Each piece is refined only while some tree still has a test that cuts it,
//! so the pieces are unions of cells of the union split-level grid and never
//! more numerous than those cells.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::model::{Label, Node, TreeModel};
use crate::region::{Region, Side};
use crate::schema::FeatureSchema;

/// Walks the constant pieces of `region` for `trees`, calling `visit` with the
/// piece and the label of every tree on it (same order as `trees`).
///
/// Returns the number of pieces visited. `visit` may stop the walk early by
/// returning `ControlFlow::Break`. Fails once more than `cap` pieces would be
/// needed.
pub fn for_each_constant_piece<F>(
    schema: &FeatureSchema,
    trees: &[&TreeModel],
    region: Region,
    cap: usize,
    mut visit: F,
) -> Result<usize>
where
    F: FnMut(&Region, &[Label]) -> ControlFlow<()>,
{
    if region.is_empty() {
        return Ok(0);
    }
    let mut visited = 0usize;
    let mut labels = vec![Label(0); trees.len()];
    let mut stack: Vec<(Region, Vec<usize>)> = vec![(region, vec![0; trees.len()])];
    'pieces: while let Some((piece, mut cursors)) = stack.pop() {
        for (t, tree) in trees.iter().enumerate() {
            let nodes = tree.nodes();
            loop {
                match nodes[cursors[t]] {
                    Node::Leaf { label } => {
                        labels[t] = label;
                        break;
                    }
                    Node::Split { split, left, right } => match piece.side_of(schema, split.axis, split.threshold) {
                        Some(Side::Left) => cursors[t] = left,
                        Some(Side::Right) => cursors[t] = right,
                        None => {
                            let r = piece.restrict(schema, split.axis, split.threshold, Side::Right);
                            let l = piece.restrict(schema, split.axis, split.threshold, Side::Left);
                            stack.push((r, cursors.clone()));
                            stack.push((l, cursors));
                            continue 'pieces;
                        }
                    },
                }
            }
        }
        visited += 1;
        if visited > cap {
            return Err(Error::Capacity(alloc::format!(
                "more than {cap} constant pieces; use sampled fidelity or a heuristic oracle instead"
            )));
        }
        if visit(&piece, &labels).is_break() {
            break;
        }
    }
    Ok(visited)
}
