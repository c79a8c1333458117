use crate::error::{Error, Result};
use crate::greedy_tree::{GreedyTree, PermEntry, Permutation, TreeParams};
use crate::metric::{Metric, PointId};
use crate::scalar::Scalar;

/// Quadratic farthest-point traversal from `start`.
///
/// Each step takes the point farthest from the points chosen so far (ties to
/// the smaller id). A point's predecessor is the first chosen point that
/// attains its nearest distance. Duplicates end up last with `eps = 0`.
pub fn gonzalez<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    start: PointId,
) -> Result<(Permutation<T>, GreedyTree<T>)> {
    let n = space.len();
    if start.index() >= n {
        return Err(Error::InvalidPoint {
            index: start.index(),
            n,
        });
    }
    let mut nn = vec![T::zero(); n];
    let mut pred = vec![start; n];
    let mut done = vec![false; n];
    done[start.index()] = true;
    for (i, d) in nn.iter_mut().enumerate() {
        if i != start.index() {
            *d = space.dist(PointId(i as u32), start);
        }
    }
    let mut tree = GreedyTree::with_capacity(start, TreeParams::EXACT, n);
    let mut entries = Vec::with_capacity(n);
    entries.push(PermEntry {
        point: start,
        pred: None,
        eps: T::zero(),
    });
    for _ in 1..n {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !done[i] && best.is_none_or(|b| nn[i] > nn[b]) {
                best = Some(i);
            }
        }
        let q = best.expect("points remain");
        done[q] = true;
        let qp = PointId(q as u32);
        entries.push(PermEntry {
            point: qp,
            pred: Some(pred[q]),
            eps: nn[q],
        });
        tree.attach(pred[q], qp, nn[q])?;
        for i in 0..n {
            if !done[i] {
                let d = space.dist(PointId(i as u32), qp);
                if d < nn[i] {
                    nn[i] = d;
                    pred[i] = qp;
                }
            }
        }
    }
    tree.finish();
    Ok((
        Permutation {
            entries,
            factor_claim: 1.0,
        },
        tree,
    ))
}
