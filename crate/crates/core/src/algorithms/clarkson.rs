use std::cmp::Reverse;
use std::time::Instant;

use super::{bb_tree_params, NoObserver, Observer, RunTelemetry};
use crate::error::Result;
use crate::fvd::{Fvd, FvdConfig, InsertionReport, Points, ScanMode};
use crate::greedy_tree::{GreedyTree, PermEntry, Permutation};
use crate::metric::{DistanceCounter, Metric, PointId};
use crate::queues::ExactMaxHeap;
use crate::scalar::Scalar;

/// Clarkson's algorithm in point mode with an exact max-heap of cells.
///
/// Cells are keyed by out-radius, ties to the smaller farthest point, and
/// point location scans every member of the old cell and its neighbors.
/// With [`FvdConfig::EXACT`] the output equals [`super::gonzalez`].
pub fn clarkson<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    start: PointId,
    cfg: &FvdConfig,
) -> Result<(Permutation<T>, GreedyTree<T>, RunTelemetry)> {
    clarkson_observed(space, start, cfg, &mut NoObserver)
}

/// [`clarkson`] with observer hooks.
pub fn clarkson_observed<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    start: PointId,
    cfg: &FvdConfig,
    obs: &mut dyn Observer<T>,
) -> Result<(Permutation<T>, GreedyTree<T>, RunTelemetry)> {
    let t0 = Instant::now();
    let counted = DistanceCounter::new(space);
    let n = space.len();
    let mut fvd: Fvd<'_, T, _, Points> = Fvd::points(&counted, start, cfg, ScanMode::Full)?;
    let mut tel = RunTelemetry::default();
    let mut tree = GreedyTree::with_capacity(start, bb_tree_params(cfg), n);
    let mut entries = Vec::with_capacity(n);
    entries.push(PermEntry {
        point: start,
        pred: None,
        eps: T::zero(),
    });
    let mut heap: ExactMaxHeap<(T, Reverse<PointId>)> = ExactMaxHeap::with_capacity(n);
    let update =
        |fvd: &Fvd<'_, T, _, Points>, heap: &mut ExactMaxHeap<(T, Reverse<PointId>)>, c: u32| {
            match fvd.farthest(c) {
                Some(m) => heap.set(c as usize, (fvd.out_radius_ub(c), Reverse(m.center))),
                None => {
                    heap.remove(c as usize);
                }
            }
        };
    update(&fvd, &mut heap, 0);
    let snap = if obs.snapshot_wanted(0) {
        Some(fvd.snapshot())
    } else {
        None
    };
    obs.on_start(&[], snap.as_ref());
    let mut rep = InsertionReport::empty(fvd.site(0), 0);
    while let Some((c, _)) = heap.pop_max() {
        tel.queue_removals += 1;
        fvd.insert_farthest_into(c as u32, &mut rep)?;
        tree.attach(rep.pred, rep.site, rep.eps)?;
        entries.push(PermEntry {
            point: rep.site,
            pred: Some(rep.pred),
            eps: rep.eps,
        });
        for &ch in &rep.changed {
            update(&fvd, &mut heap, ch);
            tel.queue_inserts += 1;
        }
        tel.record(&rep);
        let k = tel.insertions as usize;
        let snap = if obs.snapshot_wanted(k) {
            Some(fvd.snapshot())
        } else {
            None
        };
        obs.on_insertion(&rep, snap.as_ref());
    }
    tree.finish();
    tel.distance_evals = counted.count();
    tel.max_degree = fvd.max_degree();
    tel.max_cell_entries = fvd.max_cell_entries();
    tel.seconds = t0.elapsed().as_secs_f64();
    let perm = Permutation {
        entries,
        factor_claim: cfg.cell_approx * cfg.heap_approx,
    };
    Ok((perm, tree, tel))
}
