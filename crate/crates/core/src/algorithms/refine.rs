use std::cmp::Reverse;
use std::time::Instant;

use super::RunTelemetry;
use crate::error::{Error, Result};
use crate::fvd::{Forest, Fvd, FvdConfig, Hierarchy, InsertionReport, ScanMode, SplitEvent};
use crate::greedy_tree::{GreedyTree, PermEntry, Permutation, TreeParams};
use crate::metric::{DistanceCounter, Metric};
use crate::queues::ExactMaxHeap;
use crate::scalar::Scalar;

type CellHeap<T> = ExactMaxHeap<(T, Reverse<crate::metric::PointId>)>;
type NodeHeap<T> = ExactMaxHeap<(T, Reverse<u32>)>;

/// Turns any greedy tree on all `n` points into a `(1 + 1/n)`-approximate
/// greedy permutation.
///
/// Cells are exact Voronoi cells over tree nodes. Before each insertion,
/// every stored node whose radius exceeds `1/n` of the current farthest
/// center distance is split in place, so the chosen center is within that
/// factor of the true farthest point.
pub fn gt_refine<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    tree: &GreedyTree<T>,
) -> Result<(Permutation<T>, GreedyTree<T>, RunTelemetry)> {
    let n = space.len();
    if tree.len() != n {
        return Err(Error::Mismatch(format!(
            "tree has {} points, space has {n}",
            tree.len()
        )));
    }
    if !tree.is_finished() {
        return Err(Error::Contract(
            "refine input must be a finished tree".into(),
        ));
    }
    let t0 = Instant::now();
    let counted = DistanceCounter::new(space);
    let forest = Forest::new(vec![tree]);
    let root = forest.root_entry(0);
    let start = tree.root_point();
    let mut fvd = Fvd::new(
        &counted,
        forest,
        &[root],
        start,
        &FvdConfig::EXACT,
        ScanMode::Pruned,
        false,
    )?;
    let claim = 1.0 + 1.0 / n as f64;
    let mut out = GreedyTree::with_capacity(
        start,
        TreeParams {
            alpha: 1.0,
            delta: 1.0,
            gamma: claim,
        },
        n,
    );
    let mut entries = Vec::with_capacity(n);
    entries.push(PermEntry {
        point: start,
        pred: None,
        eps: T::zero(),
    });
    let mut tel = RunTelemetry::default();
    let nt = T::of(n as f64);

    let mut cells: CellHeap<T> = ExactMaxHeap::with_capacity(n);
    let mut nodes: NodeHeap<T> = ExactMaxHeap::new();
    update_cell(&fvd, &mut cells, 0);
    track_member(&fvd, &mut nodes, root);

    let mut rep = InsertionReport::empty(fvd.site(0), 0);
    loop {
        loop {
            let Some((e, (rad, _))) = nodes.peek() else {
                break;
            };
            let amax = cells.peek().map_or(T::zero(), |(_, (d, _))| d);
            if !(rad * nt > amax) && !cells.is_empty() {
                break;
            }
            let c = fvd.cell_of_entry(e as u32).expect("tracked node is stored");
            let ev = fvd.split_in_place(e as u32)?;
            tel.splits_refine += 1;
            nodes.remove(e);
            for ch in [ev.children.0, ev.children.1] {
                track_member(&fvd, &mut nodes, ch);
            }
            update_cell(&fvd, &mut cells, c);
        }
        let Some((c, _)) = cells.pop_max() else { break };
        fvd.insert_farthest_into(c as u32, &mut rep)?;
        out.attach(rep.pred, rep.site, rep.eps)?;
        entries.push(PermEntry {
            point: rep.site,
            pred: Some(rep.pred),
            eps: rep.eps,
        });
        track_splits(&fvd, &mut nodes, &rep.splits);
        for &ch in &rep.changed {
            update_cell(&fvd, &mut cells, ch);
        }
        tel.record(&rep);
    }
    if entries.len() != n {
        return Err(Error::DuplicatePoints(format!(
            "refinement reached {} of {n} points",
            entries.len()
        )));
    }
    out.finish();
    tel.distance_evals = counted.count();
    tel.max_degree = fvd.max_degree();
    tel.max_cell_entries = fvd.max_cell_entries();
    tel.seconds = t0.elapsed().as_secs_f64();
    Ok((
        Permutation {
            entries,
            factor_claim: claim,
        },
        out,
        tel,
    ))
}

fn update_cell<T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>>(
    fvd: &Fvd<'_, T, M, H>,
    cells: &mut CellHeap<T>,
    c: u32,
) {
    match fvd.farthest(c) {
        Some(m) if m.center != fvd.site(c) => cells.set(c as usize, (m.dist, Reverse(m.center))),
        _ => {
            cells.remove(c as usize);
        }
    }
}

fn track_member<T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>>(
    fvd: &Fvd<'_, T, M, H>,
    nodes: &mut NodeHeap<T>,
    e: u32,
) {
    if fvd.member(e).is_some() && fvd.hierarchy().children(e).is_some() {
        nodes.set(e as usize, (fvd.hierarchy().radius(e), Reverse(e)));
    } else {
        nodes.remove(e as usize);
    }
}

fn track_splits<T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>>(
    fvd: &Fvd<'_, T, M, H>,
    nodes: &mut NodeHeap<T>,
    splits: &[SplitEvent<T>],
) {
    for s in splits {
        nodes.remove(s.entry as usize);
        track_member(fvd, nodes, s.children.0);
        track_member(fvd, nodes, s.children.1);
    }
}
