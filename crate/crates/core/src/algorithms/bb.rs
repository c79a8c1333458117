use std::time::Instant;

use super::{bb_tree_params, Observer, RunTelemetry};
use crate::error::{Error, Result};
use crate::fvd::{
    Forest, Fvd, FvdConfig, Hierarchy, InsertionReport, Points, QueueState, ScanMode, Snapshot,
    SplitEvent,
};
use crate::greedy_tree::{GreedyTree, Permutation};
use crate::metric::{DistanceCounter, Metric, PointId};
use crate::queues::{BackburnerOrder, BucketQueue, Placement};
use crate::scalar::Scalar;

/// Knobs for the bucket-queue runs.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct BbOptions {
    pub backburner: BackburnerOrder,
    /// Collect the per-annulus touch histogram.
    pub histogram: bool,
}

fn queue_state<T: Scalar>(q: &BucketQueue<T>) -> QueueState<T> {
    QueueState {
        entries: q.entries().map(|(h, k, bb)| (h as u32, k, bb)).collect(),
        head: q.peek_max().map(|r| (r.handle as u32, r.from_backburner)),
    }
}

fn snap_with_queue<T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>>(
    fvd: &Fvd<'_, T, M, H>,
    q: &BucketQueue<T>,
) -> Snapshot<T> {
    let mut s = fvd.snapshot();
    s.queue = Some(queue_state(q));
    s
}

fn duplicate_error(p: PointId, q: PointId) -> Error {
    Error::DuplicatePoints(format!("{p} and {q} coincide"))
}

/// (Re)queues `c` under its radius bound, or drops it when it has nothing left.
fn enqueue<T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>>(
    fvd: &Fvd<'_, T, M, H>,
    q: &mut BucketQueue<T>,
    c: u32,
    tel: &mut RunTelemetry,
    obs: &mut dyn Observer<T>,
) -> Result<()> {
    if !fvd.has_candidates(c) {
        q.remove(c as usize);
        return Ok(());
    }
    let key = fvd.out_radius_ub(c);
    if key <= T::zero() {
        let m = fvd.members(c)[0];
        return Err(duplicate_error(fvd.site(c), m.center));
    }
    let placed = q.insert(c as usize, key)?;
    let mut entered: Vec<usize> = q.take_demoted();
    if placed == Placement::Backburner {
        entered.push(c as usize);
    }
    for h in entered {
        tel.backburner_entries += 1;
        let snap = if obs.backburner_snapshots() {
            Some(snap_with_queue(fvd, q))
        } else {
            None
        };
        let k = q.key(h).expect("queued");
        obs.on_backburner_entry(h as u32, k, snap.as_ref());
    }
    Ok(())
}

fn drive<T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>>(
    fvd: &mut Fvd<'_, T, M, H>,
    tree: &mut GreedyTree<T>,
    init_splits: &[SplitEvent<T>],
    cfg: &FvdConfig,
    opts: &BbOptions,
    tel: &mut RunTelemetry,
    obs: &mut dyn Observer<T>,
) -> Result<()> {
    let mut q = BucketQueue::new(T::of(cfg.bucket_base), cfg.buckets)?
        .with_backburner_order(opts.backburner);
    if let Some((a, b)) = fvd.duplicate() {
        return Err(duplicate_error(a, b));
    }
    enqueue(fvd, &mut q, 0, tel, obs)?;
    let snap = if obs.snapshot_wanted(0) {
        Some(snap_with_queue(fvd, &q))
    } else {
        None
    };
    obs.on_start(init_splits, snap.as_ref());
    let mut rep = InsertionReport::empty(fvd.site(0), 0);
    while let Some(top) = q.remove_max() {
        let c = top.handle as u32;
        if top.from_backburner {
            tel.backburner_removals += 1;
            obs.on_backburner_removal(c, fvd.degree(c));
        }
        fvd.insert_farthest_into(c, &mut rep)?;
        rep.from_backburner = top.from_backburner;
        if let Some((a, b)) = fvd.duplicate() {
            return Err(duplicate_error(a, b));
        }
        tree.attach(rep.pred, rep.site, rep.eps)?;
        for &ch in &rep.changed {
            enqueue(fvd, &mut q, ch, tel, obs)?;
        }
        tel.record(&rep);
        let k = tel.insertions as usize;
        let snap = if obs.snapshot_wanted(k) {
            Some(snap_with_queue(fvd, &q))
        } else {
            None
        };
        obs.on_insertion(&rep, snap.as_ref());
    }
    let st = q.stats();
    tel.queue_inserts += st.inserts;
    tel.queue_removals += st.removals;
    tel.bucket_scans += st.bucket_scans;
    tel.window_shifts += st.window_shifts;
    tel.absorb_histogram(fvd.histogram());
    tel.max_degree = tel.max_degree.max(fvd.max_degree());
    tel.max_cell_entries = tel.max_cell_entries.max(fvd.max_cell_entries());
    tree.finish();
    Ok(())
}

/// Clarkson's algorithm with the bucket queue and split-free lazy moves,
/// over bare points. Returns the heap-order traversal of the output tree.
pub fn clarkson_bb<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    start: PointId,
    cfg: &FvdConfig,
    opts: &BbOptions,
    obs: &mut dyn Observer<T>,
) -> Result<(Permutation<T>, GreedyTree<T>, RunTelemetry)> {
    cfg.validate_bucketed()?;
    let t0 = Instant::now();
    let counted = DistanceCounter::new(space);
    let mut fvd: Fvd<'_, T, _, Points> = Fvd::points(&counted, start, cfg, ScanMode::Pruned)?;
    if opts.histogram {
        fvd.enable_histogram();
    }
    let mut tree = GreedyTree::with_capacity(start, bb_tree_params(cfg), space.len());
    let mut tel = RunTelemetry::default();
    drive(&mut fvd, &mut tree, &[], cfg, opts, &mut tel, obs)?;
    tel.distance_evals = counted.count();
    tel.seconds = t0.elapsed().as_secs_f64();
    Ok((tree.heap_order_traversal(), tree, tel))
}

/// Merges two greedy trees on disjoint point sets into one greedy tree
/// rooted at `a`'s root.
pub fn gt_merge<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    a: &GreedyTree<T>,
    b: &GreedyTree<T>,
    cfg: &FvdConfig,
    opts: &BbOptions,
    obs: &mut dyn Observer<T>,
) -> Result<(GreedyTree<T>, RunTelemetry)> {
    cfg.validate_bucketed()?;
    if !a.is_finished() || !b.is_finished() {
        return Err(Error::Contract(
            "merge inputs must be finished trees".into(),
        ));
    }
    for r in b.records() {
        if a.contains(r.point) {
            return Err(Error::Contract(format!("trees overlap at {}", r.point)));
        }
    }
    for r in a.records().iter().chain(b.records()) {
        if r.point.index() >= space.len() {
            return Err(Error::InvalidPoint {
                index: r.point.index(),
                n: space.len(),
            });
        }
    }
    let t0 = Instant::now();
    let counted = DistanceCounter::new(space);
    let forest = Forest::new(vec![a, b]);
    let roots = [forest.root_entry(0), forest.root_entry(1)];
    let start = a.root_point();
    let mut fvd = Fvd::new(&counted, forest, &roots, start, cfg, ScanMode::Pruned, true)?;
    if opts.histogram {
        fvd.enable_histogram();
    }
    let init_splits = fvd.tidy_cell(0);
    let mut tree = GreedyTree::with_capacity(start, bb_tree_params(cfg), a.len() + b.len());
    let mut tel = RunTelemetry::default();
    drive(&mut fvd, &mut tree, &init_splits, cfg, opts, &mut tel, obs)?;
    tel.splits_tidy += init_splits.len() as u64;
    tel.distance_evals = counted.count();
    tel.seconds = t0.elapsed().as_secs_f64();
    Ok((tree, tel))
}

/// Builds a greedy tree on all points by recursive halving of the index
/// range and merging. With `parallel` the halves run on the rayon pool; the
/// result is identical either way.
pub fn gt_build<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    cfg: &FvdConfig,
    parallel: bool,
) -> Result<(GreedyTree<T>, RunTelemetry)> {
    cfg.validate_bucketed()?;
    if space.is_empty() {
        return Err(Error::EmptyInput);
    }
    let t0 = Instant::now();
    let (tree, mut tel) = build_range(space, cfg, 0, space.len() as u32, parallel)?;
    tel.seconds = t0.elapsed().as_secs_f64();
    Ok((tree, tel))
}

fn build_range<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    cfg: &FvdConfig,
    lo: u32,
    hi: u32,
    parallel: bool,
) -> Result<(GreedyTree<T>, RunTelemetry)> {
    let params = bb_tree_params(cfg);
    match hi - lo {
        1 => {
            let mut t = GreedyTree::leaf(PointId(lo), params);
            t.finish();
            Ok((t, RunTelemetry::default()))
        }
        2 => {
            let d = space.dist(PointId(lo), PointId(lo + 1));
            if d <= T::zero() {
                return Err(duplicate_error(PointId(lo), PointId(lo + 1)));
            }
            let mut t = GreedyTree::leaf(PointId(lo), params);
            t.attach(PointId(lo), PointId(lo + 1), d)?;
            t.finish();
            let tel = RunTelemetry {
                distance_evals: 1,
                ..RunTelemetry::default()
            };
            Ok((t, tel))
        }
        len => {
            let mid = lo + len / 2;
            let (left, right) = if parallel && len >= 512 {
                rayon::join(
                    || build_range(space, cfg, lo, mid, parallel),
                    || build_range(space, cfg, mid, hi, parallel),
                )
            } else {
                (
                    build_range(space, cfg, lo, mid, false),
                    build_range(space, cfg, mid, hi, false),
                )
            };
            let (a, ta) = left?;
            let (b, tb) = right?;
            let (t, mut tel) = gt_merge(
                space,
                &a,
                &b,
                cfg,
                &BbOptions::default(),
                &mut super::NoObserver,
            )?;
            tel.merge(&ta);
            tel.merge(&tb);
            Ok((t, tel))
        }
    }
}
