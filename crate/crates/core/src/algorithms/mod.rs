//! End-to-end procedures: the quadratic oracle, Clarkson's algorithm with an
//! exact heap, the bucket-queue variant over points or tree nodes, tree
//! merging, recursive building and refinement.

mod bb;
mod clarkson;
mod gonzalez;
mod refine;

pub use bb::{clarkson_bb, gt_build, gt_merge, BbOptions};
pub use clarkson::{clarkson, clarkson_observed};
pub use gonzalez::gonzalez;
pub use refine::gt_refine;

use std::collections::HashMap;

use crate::fvd::{FvdConfig, InsertionReport, Snapshot, SplitEvent, SplitKind};
use crate::greedy_tree::TreeParams;
use crate::scalar::Scalar;

/// Counters collected during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTelemetry {
    pub distance_evals: u64,
    pub insertions: u64,
    pub touches: u64,
    pub splits_tidy: u64,
    pub splits_move: u64,
    pub splits_refine: u64,
    pub edges_removed: u64,
    pub queue_inserts: u64,
    pub queue_removals: u64,
    pub bucket_scans: u64,
    pub window_shifts: u64,
    pub backburner_entries: u64,
    pub backburner_removals: u64,
    pub max_degree: usize,
    pub max_cell_entries: usize,
    /// Largest per-entry touch count within one `[2^k, 2^(k+1))` annulus.
    pub touch_histogram_max: u32,
    pub seconds: f64,
}

impl RunTelemetry {
    fn record<T: Scalar>(&mut self, rep: &InsertionReport<T>) {
        self.insertions += 1;
        self.touches += rep.touches;
        self.splits_tidy += rep.split_count(SplitKind::Tidy) as u64;
        self.splits_move += rep.split_count(SplitKind::Move) as u64;
        self.splits_refine += rep.split_count(SplitKind::Refine) as u64;
        self.edges_removed += rep.edges_removed.len() as u64;
    }

    fn absorb_histogram(&mut self, h: Option<&HashMap<(u32, i32), u32>>) {
        if let Some(h) = h {
            self.touch_histogram_max = self
                .touch_histogram_max
                .max(h.values().copied().max().unwrap_or(0));
        }
    }

    /// Sums counters and keeps maxima; wall time is not combined.
    pub fn merge(&mut self, o: &RunTelemetry) {
        self.distance_evals += o.distance_evals;
        self.insertions += o.insertions;
        self.touches += o.touches;
        self.splits_tidy += o.splits_tidy;
        self.splits_move += o.splits_move;
        self.splits_refine += o.splits_refine;
        self.edges_removed += o.edges_removed;
        self.queue_inserts += o.queue_inserts;
        self.queue_removals += o.queue_removals;
        self.bucket_scans += o.bucket_scans;
        self.window_shifts += o.window_shifts;
        self.backburner_entries += o.backburner_entries;
        self.backburner_removals += o.backburner_removals;
        self.max_degree = self.max_degree.max(o.max_degree);
        self.max_cell_entries = self.max_cell_entries.max(o.max_cell_entries);
        self.touch_histogram_max = self.touch_histogram_max.max(o.touch_histogram_max);
    }
}

/// Hooks into a running diagram construction, used by the verifier.
pub trait Observer<T: Scalar> {
    /// Whether the insertion with this 1-based index wants a snapshot.
    fn snapshot_wanted(&mut self, _insertion: usize) -> bool {
        false
    }

    /// Whether backburner entries want a snapshot.
    fn backburner_snapshots(&self) -> bool {
        false
    }

    /// Called once before the first insertion with any splits done while
    /// preparing the initial cell.
    fn on_start(&mut self, _splits: &[SplitEvent<T>], _snap: Option<&Snapshot<T>>) {}

    fn on_insertion(&mut self, _rep: &InsertionReport<T>, _snap: Option<&Snapshot<T>>) {}

    fn on_backburner_entry(&mut self, _cell: u32, _key: T, _snap: Option<&Snapshot<T>>) {}

    fn on_backburner_removal(&mut self, _cell: u32, _degree: usize) {}
}

/// Observer that records nothing.
#[derive(Copy, Clone, Debug, Default)]
pub struct NoObserver;

impl<T: Scalar> Observer<T> for NoObserver {}

/// Constants claimed for trees built by the bucket-queue algorithm:
/// `(λ/γ, κ, κγ²)`.
pub fn bb_tree_params(cfg: &FvdConfig) -> TreeParams {
    TreeParams {
        alpha: cfg.lazy / cfg.heap_approx,
        delta: cfg.cell_approx,
        gamma: cfg.cell_approx * cfg.heap_approx * cfg.heap_approx,
    }
}
