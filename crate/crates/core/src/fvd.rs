//! Incremental finite Voronoi diagrams over points or greedy-tree nodes.
//!
//! A cell holds member entries in a max-heap keyed by
//! `d(site, center) + radius`. Inserting a site runs point location over the
//! old site's cell and its neighbors, connects the new site to every site
//! within two hops, tidies the affected cells in node mode and prunes edges
//! that are longer than `R(a) + R(b) + max(R(a), R(b))`.

use std::collections::HashMap;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

type Entries = SmallVec<[u32; 16]>;

use crate::error::{Error, Result};
use crate::greedy_tree::{GreedyTree, NodeId};
use crate::metric::{Metric, PointId};
use crate::scalar::Scalar;

/// Algorithm constants.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FvdConfig {
    /// Lazy-move constant `λ`.
    pub lazy: f64,
    /// Cell approximation `κ`.
    pub cell_approx: f64,
    /// Heap approximation `γ`.
    pub heap_approx: f64,
    /// Bucket base `β`, also the tidy constant.
    pub bucket_base: f64,
    /// Number of buckets `s` in the queue window.
    pub buckets: usize,
}

impl Default for FvdConfig {
    fn default() -> Self {
        FvdConfig {
            lazy: 2.0,
            cell_approx: 3.0,
            heap_approx: 4.0,
            bucket_base: 2.0,
            buckets: 7,
        }
    }
}

impl FvdConfig {
    /// `λ = κ = γ = 1`: exact cells, reproduces the strict greedy order.
    pub const EXACT: FvdConfig = FvdConfig {
        lazy: 1.0,
        cell_approx: 1.0,
        heap_approx: 1.0,
        bucket_base: 2.0,
        buckets: 7,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, m: &str| {
            if c {
                Ok(())
            } else {
                Err(Error::Contract(m.to_string()))
            }
        };
        ok(
            self.lazy >= 1.0 && self.lazy.is_finite(),
            "lazy constant must be at least 1",
        )?;
        ok(
            self.cell_approx >= self.lazy && self.cell_approx.is_finite(),
            "cell approximation must be at least the lazy constant",
        )?;
        ok(
            self.heap_approx >= 1.0 && self.heap_approx.is_finite(),
            "heap approximation must be at least 1",
        )?;
        ok(
            self.bucket_base > 1.0 && self.bucket_base.is_finite(),
            "bucket base must exceed 1",
        )?;
        ok(self.buckets >= 1, "bucket window must be positive")
    }

    /// Extra requirement for bucket-queue runs: `γ ≥ c²` with `c = β`.
    pub fn validate_bucketed(&self) -> Result<()> {
        self.validate()?;
        if self.heap_approx < self.tidy() * self.tidy() * (1.0 - 1e-12) {
            return Err(Error::Contract(format!(
                "heap approximation {} is below the squared bucket base {}",
                self.heap_approx,
                self.tidy() * self.tidy()
            )));
        }
        Ok(())
    }

    /// Tidy constant `c`.
    pub fn tidy(&self) -> f64 {
        self.bucket_base
    }

    /// Aspect ratio bound `κγ(1+κ)/λ`.
    pub fn tau(&self) -> f64 {
        self.cell_approx * self.heap_approx * (1.0 + self.cell_approx) / self.lazy
    }

    /// Empty annulus constant `β^(s-1)/(κ(1+κ))`.
    pub fn theta(&self) -> f64 {
        self.bucket_base.powi(self.buckets as i32 - 1)
            / (self.cell_approx * (1.0 + self.cell_approx))
    }

    /// Strong packing constant `(λ²-λ-1)/((λ²-1)(κ+1)κ)`, zero when `λ = 1`.
    pub fn strong_packing(&self) -> f64 {
        let l = self.lazy;
        let k = self.cell_approx;
        if l <= 1.0 {
            return 0.0;
        }
        (l * l - l - 1.0) / ((l * l - 1.0) * (k + 1.0) * k)
    }

    /// Degree ceiling `(12κγ)^d`.
    pub fn degree_ceiling(&self, dim: u32) -> f64 {
        (12.0 * self.cell_approx * self.heap_approx).powi(dim as i32)
    }
}

/// Recursive clusters stored in cells. Entries are dense `u32` handles.
pub trait Hierarchy<T: Scalar>: Sync {
    fn entry_bound(&self) -> usize;
    fn center(&self, e: u32) -> PointId;
    fn radius(&self, e: u32) -> T;
    fn children(&self, e: u32) -> Option<(u32, u32)>;
    /// Calls `f` for every point below `e`.
    fn for_each_point(&self, e: u32, f: &mut dyn FnMut(PointId));
}

/// Bare points: entry `i` is point `i`.
#[derive(Copy, Clone, Debug)]
pub struct Points(pub usize);

impl<T: Scalar> Hierarchy<T> for Points {
    fn entry_bound(&self) -> usize {
        self.0
    }
    fn center(&self, e: u32) -> PointId {
        PointId(e)
    }
    fn radius(&self, _: u32) -> T {
        T::zero()
    }
    fn children(&self, _: u32) -> Option<(u32, u32)> {
        None
    }
    fn for_each_point(&self, e: u32, f: &mut dyn FnMut(PointId)) {
        f(PointId(e))
    }
}

/// Nodes of several greedy trees with globally numbered entries.
#[derive(Clone, Debug)]
pub struct Forest<'t, T> {
    trees: Vec<&'t GreedyTree<T>>,
    offsets: Vec<u32>,
}

impl<'t, T: Scalar> Forest<'t, T> {
    pub fn new(trees: Vec<&'t GreedyTree<T>>) -> Self {
        let mut offsets = Vec::with_capacity(trees.len() + 1);
        let mut acc = 0u32;
        for t in &trees {
            offsets.push(acc);
            acc += t.node_count() as u32;
        }
        offsets.push(acc);
        Forest { trees, offsets }
    }

    pub fn root_entry(&self, tree: usize) -> u32 {
        self.offsets[tree] + self.trees[tree].root().0
    }

    pub fn trees(&self) -> &[&'t GreedyTree<T>] {
        &self.trees
    }

    #[inline]
    pub fn locate(&self, e: u32) -> (&'t GreedyTree<T>, u32, NodeId) {
        let t = self.offsets.partition_point(|&o| o <= e) - 1;
        let off = self.offsets[t];
        (self.trees[t], off, NodeId(e - off))
    }
}

impl<T: Scalar> Hierarchy<T> for Forest<'_, T> {
    fn entry_bound(&self) -> usize {
        *self.offsets.last().unwrap() as usize
    }
    fn center(&self, e: u32) -> PointId {
        let (t, _, n) = self.locate(e);
        t.node(n).center
    }
    fn radius(&self, e: u32) -> T {
        let (t, _, n) = self.locate(e);
        t.node(n).rad_ub
    }
    fn children(&self, e: u32) -> Option<(u32, u32)> {
        let (t, off, n) = self.locate(e);
        t.node(n).children().map(|(l, r)| (l.0 + off, r.0 + off))
    }
    fn for_each_point(&self, e: u32, f: &mut dyn FnMut(PointId)) {
        let (t, _, n) = self.locate(e);
        for p in t.points_under(n) {
            f(p);
        }
    }
}

/// Which members of a cell point location evaluates.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ScanMode {
    /// Every member of the scanned cells.
    Full,
    /// Only members whose key exceeds `λ/(λ+1)·d(q, p')`; all others
    /// provably stay.
    Pruned,
}

/// Outcome of locating one entry against a new site.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Location {
    Move,
    Stay,
    Split,
}

/// Split-on-move rule for a node with center `a` and radius bound `r`.
pub fn locate_rule<T: Scalar>(lazy: T, cell_approx: T, d_new: T, d_old: T, r: T) -> Location {
    if lazy * (d_new + r) < d_old - r {
        Location::Move
    } else if cell_approx * (d_new - r) >= d_old + r {
        Location::Stay
    } else {
        Location::Split
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Tidy,
    Move,
    Refine,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SplitEvent<T> {
    pub entry: u32,
    pub center: PointId,
    pub rad_ub: T,
    pub kind: SplitKind,
    pub children: (u32, u32),
}

/// A stored cell member.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Member<T> {
    pub entry: u32,
    pub center: PointId,
    /// `d(site, center)`.
    pub dist: T,
    /// `dist + radius`.
    pub key: T,
}

impl<T: Scalar> Member<T> {
    #[inline]
    fn above(&self, o: &Member<T>) -> bool {
        self.key > o.key
            || (self.key == o.key
                && (self.center < o.center || (self.center == o.center && self.entry < o.entry)))
    }
}

/// Neighbor link with the distance between the two sites.
#[derive(Copy, Clone, Debug, PartialEq)]
struct Edge<T> {
    to: u32,
    len: T,
}

/// State of one Voronoi cell.
#[derive(Clone, Debug)]
struct Cell<T> {
    site: PointId,
    /// Visit stamp for two-hop searches.
    mark: u32,
    out_ub: T,
    heap: Vec<Member<T>>,
    adj: Vec<Edge<T>>,
}

/// Everything one site insertion did.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertionReport<T> {
    pub site: PointId,
    pub cell: u32,
    pub pred: PointId,
    pub pred_cell: u32,
    pub eps: T,
    /// Entries relocated into the new cell.
    pub moved: Vec<u32>,
    pub splits: Vec<SplitEvent<T>>,
    pub edges_added: Vec<(PointId, PointId)>,
    pub edges_removed: Vec<(PointId, PointId)>,
    /// Entries evaluated by the location rule.
    pub touches: u64,
    /// Cells whose member set or radius bound may have changed, new cell included.
    pub changed: Vec<u32>,
    pub from_backburner: bool,
}

impl<T: Scalar> InsertionReport<T> {
    /// A report with nothing recorded yet.
    pub fn empty(site: PointId, cell: u32) -> Self {
        InsertionReport {
            site,
            cell,
            pred: site,
            pred_cell: cell,
            eps: T::zero(),
            moved: Vec::new(),
            splits: Vec::new(),
            edges_added: Vec::new(),
            edges_removed: Vec::new(),
            touches: 0,
            changed: Vec::new(),
            from_backburner: false,
        }
    }

    fn reset(&mut self, site: PointId, cell: u32, pred: PointId, pred_cell: u32, eps: T) {
        self.site = site;
        self.cell = cell;
        self.pred = pred;
        self.pred_cell = pred_cell;
        self.eps = eps;
        self.moved.clear();
        self.splits.clear();
        self.edges_added.clear();
        self.edges_removed.clear();
        self.touches = 0;
        self.changed.clear();
        self.from_backburner = false;
    }

    pub fn split_count(&self, kind: SplitKind) -> usize {
        self.splits.iter().filter(|s| s.kind == kind).count()
    }

    /// One line of the trace format.
    pub fn trace_line(&self) -> String {
        format!(
            "site={} pred={} eps={} moved={} splits={} edges_added={} edges_removed={} touches={} from_backburner={}",
            self.site,
            self.pred,
            self.eps,
            self.moved.len(),
            self.splits.len(),
            self.edges_added.len(),
            self.edges_removed.len(),
            self.touches,
            self.from_backburner
        )
    }
}

/// Brute-force friendly copy of the diagram.
#[derive(Clone, Debug, Default)]
pub struct Snapshot<T> {
    pub sites: Vec<PointId>,
    /// All points of each cell, its site included.
    pub cell_points: Vec<Vec<PointId>>,
    pub members: Vec<Vec<Member<T>>>,
    pub out_ub: Vec<T>,
    pub adj: Vec<Vec<u32>>,
    pub queue: Option<QueueState<T>>,
}

/// Queue contents at snapshot time.
#[derive(Clone, Debug, Default)]
pub struct QueueState<T> {
    /// `(cell, key, on_backburner)` for each queued cell.
    pub entries: Vec<(u32, T, bool)>,
    /// Cell the queue would return next.
    pub head: Option<(u32, bool)>,
}

const NONE: (u32, u32) = (u32::MAX, u32::MAX);

/// The diagram.
pub struct Fvd<'a, T, M: ?Sized, H> {
    space: &'a M,
    hier: H,
    lazy: T,
    cell_approx: T,
    tidy_c: T,
    prune_factor: T,
    scan: ScanMode,
    tidy: bool,
    cells: Vec<Cell<T>>,
    site_of: FxHashMap<PointId, u32>,
    slot: Vec<(u32, u32)>,
    two_hop: Vec<u32>,
    stamp: u32,
    duplicate: Option<(PointId, PointId)>,
    touches: u64,
    max_degree: usize,
    max_entries: usize,
    histogram: Option<HashMap<(u32, i32), u32>>,
}

impl<'a, T: Scalar, M: Metric<T> + ?Sized, H: Hierarchy<T>> Fvd<'a, T, M, H> {
    /// One cell at `start` holding `entries`. No tidying is done here.
    pub fn new(
        space: &'a M,
        hier: H,
        entries: &[u32],
        start: PointId,
        cfg: &FvdConfig,
        scan: ScanMode,
        tidy: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        if start.index() >= space.len() {
            return Err(Error::InvalidPoint {
                index: start.index(),
                n: space.len(),
            });
        }
        let lazy = T::of(cfg.lazy);
        let mut f = Fvd {
            space,
            lazy,
            cell_approx: T::of(cfg.cell_approx),
            tidy_c: T::of(cfg.tidy()),
            prune_factor: lazy / (lazy + T::one()) * T::of(1.0 - 1e-9),
            scan,
            tidy,
            cells: Vec::new(),
            site_of: FxHashMap::default(),
            slot: vec![NONE; hier.entry_bound()],
            hier,
            two_hop: Vec::new(),
            stamp: 0,
            duplicate: None,
            touches: 0,
            max_degree: 0,
            max_entries: 0,
            histogram: None,
        };
        f.new_cell(start);
        for &e in entries {
            let c = f.hier.center(e);
            let d = if c == start {
                T::zero()
            } else {
                space.dist(start, c)
            };
            f.add_member(0, e, d);
        }
        f.refresh_ub(0);
        f.max_entries = f.cells[0].heap.len();
        Ok(f)
    }

    /// Point mode over the whole space.
    pub fn points(space: &'a M, start: PointId, cfg: &FvdConfig, scan: ScanMode) -> Result<Self>
    where
        H: From<Points>,
    {
        let n = space.len();
        let hier = H::from(Points(n));
        let entries: Vec<u32> = (0..n as u32).collect();
        Self::new(space, hier, &entries, start, cfg, scan, false)
    }

    /// Records per-entry touch counts by `floor(log2 d(center, new site))`.
    pub fn enable_histogram(&mut self) {
        self.histogram = Some(HashMap::new());
    }

    pub fn histogram(&self) -> Option<&HashMap<(u32, i32), u32>> {
        self.histogram.as_ref()
    }

    pub fn hierarchy(&self) -> &H {
        &self.hier
    }

    pub fn space(&self) -> &'a M {
        self.space
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn site(&self, c: u32) -> PointId {
        self.cells[c as usize].site
    }

    pub fn cell_of_site(&self, p: PointId) -> Option<u32> {
        self.site_of.get(&p).copied()
    }

    pub fn neighbors(&self, c: u32) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.cells[c as usize].adj.iter().map(|e| e.to)
    }

    pub fn degree(&self, c: u32) -> usize {
        self.cells[c as usize].adj.len()
    }

    pub fn members(&self, c: u32) -> &[Member<T>] {
        &self.cells[c as usize].heap
    }

    pub fn out_radius_ub(&self, c: u32) -> T {
        self.cells[c as usize].out_ub
    }

    pub fn has_candidates(&self, c: u32) -> bool {
        !self.cells[c as usize].heap.is_empty()
    }

    pub fn total_touches(&self) -> u64 {
        self.touches
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn max_cell_entries(&self) -> usize {
        self.max_entries
    }

    /// First pair of distinct points found at distance zero, if any.
    pub fn duplicate(&self) -> Option<(PointId, PointId)> {
        self.duplicate
    }

    /// Cell currently holding `entry`.
    pub fn cell_of_entry(&self, entry: u32) -> Option<u32> {
        match self.slot.get(entry as usize) {
            Some(&(c, _)) if c != u32::MAX => Some(c),
            _ => None,
        }
    }

    pub fn member(&self, entry: u32) -> Option<Member<T>> {
        match self.slot.get(entry as usize) {
            Some(&(c, p)) if c != u32::MAX => Some(self.cells[c as usize].heap[p as usize]),
            _ => None,
        }
    }

    /// Member whose center is farthest from the site; ties go to the smaller
    /// center. Uses the key bound to skip subtrees of the member heap.
    pub fn farthest(&self, c: u32) -> Option<Member<T>> {
        let h = &self.cells[c as usize].heap;
        let mut best: Option<Member<T>> = None;
        let mut stack: SmallVec<[usize; 32]> = smallvec::smallvec![0];
        while let Some(i) = stack.pop() {
            if i >= h.len() {
                continue;
            }
            let m = h[i];
            if let Some(b) = best {
                if m.key < b.dist {
                    continue;
                }
            }
            let better = match best {
                None => true,
                Some(b) => {
                    m.dist > b.dist
                        || (m.dist == b.dist && (m.center, m.entry) < (b.center, b.entry))
                }
            };
            if better {
                best = Some(m);
            }
            stack.push(2 * i + 1);
            stack.push(2 * i + 2);
        }
        best
    }

    /// Sites at most two steps from cell `c`, excluding `c`.
    pub fn neighbors_within_two_hops(&mut self, c: u32) -> Vec<u32> {
        let mut out = Vec::new();
        self.two_hop_into(c, &mut out);
        out
    }

    fn two_hop_into(&mut self, c: u32, out: &mut Vec<u32>) {
        self.bump_stamp();
        let st = self.stamp;
        self.cells[c as usize].mark = st;
        out.clear();
        for i in 0..self.cells[c as usize].adj.len() {
            let b = self.cells[c as usize].adj[i].to;
            if self.cells[b as usize].mark != st {
                self.cells[b as usize].mark = st;
                out.push(b);
            }
        }
        let first = out.len();
        for i in 0..first {
            let b = out[i];
            for j in 0..self.cells[b as usize].adj.len() {
                let x = self.cells[b as usize].adj[j].to;
                if self.cells[x as usize].mark != st {
                    self.cells[x as usize].mark = st;
                    out.push(x);
                }
            }
        }
    }

    /// Inserts the farthest member center of cell `c` as a new site.
    pub fn insert_farthest(&mut self, c: u32) -> Result<InsertionReport<T>> {
        let mut rep = InsertionReport::empty(self.site(c), c);
        self.insert_farthest_into(c, &mut rep)?;
        Ok(rep)
    }

    /// Like [`Fvd::insert_farthest`], reusing the buffers of `rep`.
    pub fn insert_farthest_into(&mut self, c: u32, rep: &mut InsertionReport<T>) -> Result<()> {
        let m = self.farthest(c).ok_or_else(|| {
            Error::Contract(format!("cell of {} has no candidates", self.site(c)))
        })?;
        self.insert_member(c, m, rep)
    }

    /// Inserts point `p` taken from cell `c` as a new site.
    pub fn insert_site(&mut self, c: u32, p: PointId) -> Result<InsertionReport<T>> {
        if self.site_of.contains_key(&p) {
            return Err(Error::Contract(format!("{p} is already a site")));
        }
        let m = self.cells[c as usize]
            .heap
            .iter()
            .filter(|m| m.center == p)
            .min_by_key(|m| m.entry)
            .copied()
            .ok_or_else(|| {
                Error::Contract(format!("{p} is not in the cell of {}", self.site(c)))
            })?;
        let mut rep = InsertionReport::empty(p, c);
        self.insert_member(c, m, &mut rep)?;
        Ok(rep)
    }

    fn insert_member(&mut self, c: u32, m: Member<T>, rep: &mut InsertionReport<T>) -> Result<()> {
        let pnew = m.center;
        if self.site_of.contains_key(&pnew) {
            return Err(Error::Contract(format!("{pnew} is already a site")));
        }
        let pold = self.site(c);
        let eps = m.dist;
        let cnew = self.new_cell(pnew);
        rep.reset(pnew, cnew, pold, c, eps);

        // the new site's own leaf leaves the diagram
        if self.hier.children(m.entry).is_none() {
            self.remove_member(m.entry);
            rep.touches += 1;
        }

        // point location over the old cell and its neighbors
        let mut scan_cells: SmallVec<[u32; 32]> =
            SmallVec::with_capacity(1 + self.cells[c as usize].adj.len());
        scan_cells.push(c);
        scan_cells.extend(self.cells[c as usize].adj.iter().map(|e| e.to));
        let d_new: SmallVec<[T; 32]> = scan_cells
            .iter()
            .map(|&q| {
                if q == c {
                    eps
                } else {
                    self.space.dist(self.cells[q as usize].site, pnew)
                }
            })
            .collect();
        let old_ub: SmallVec<[T; 32]> = scan_cells
            .iter()
            .map(|&q| self.cells[q as usize].out_ub)
            .collect();
        let mut changed_mask: SmallVec<[bool; 32]> = smallvec::smallvec![false; scan_cells.len()];
        for (qi, &q) in scan_cells.iter().enumerate() {
            let candidates = self.candidates(q, d_new[qi]);
            if !candidates.is_empty() {
                changed_mask[qi] |= self.locate_all(q, cnew, pnew, candidates, rep);
            }
        }
        changed_mask[0] = true;

        // the new site links to every site within two hops of the old one;
        // the first hop of `two_hop` lists the old cell's neighbors in scan order
        let mut two_hop = std::mem::take(&mut self.two_hop);
        self.two_hop_into(c, &mut two_hop);
        let mut links: SmallVec<[(u32, T); 32]> = SmallVec::with_capacity(1 + two_hop.len());
        for (i, &b) in std::iter::once(&c).chain(two_hop.iter()).enumerate() {
            debug_assert!(i >= scan_cells.len() || scan_cells[i] == b);
            let d = match d_new.get(i) {
                Some(&d) => d,
                None => self.space.dist(self.cells[b as usize].site, pnew),
            };
            links.push((b, d));
        }

        // tidy and refresh radius bounds
        let mut prune_cells: SmallVec<[u32; 32]> = SmallVec::new();
        for (qi, &q) in scan_cells.iter().enumerate() {
            if !changed_mask[qi] {
                continue;
            }
            if self.tidy {
                self.tidy_into(q, rep);
            }
            self.refresh_ub(q);
            rep.changed.push(q);
            if self.cells[q as usize].out_ub != old_ub[qi] {
                prune_cells.push(q);
            }
        }
        if self.tidy {
            self.tidy_into(cnew, rep);
        }
        self.refresh_ub(cnew);
        rep.changed.push(cnew);

        // links that pruning would drop at once are reported but never stored
        let rn = self.cells[cnew as usize].out_ub;
        let keep = links
            .iter()
            .filter(|&&(b, d)| !too_long(d, rn, self.cells[b as usize].out_ub))
            .count();
        self.cells[cnew as usize].adj.reserve_exact(keep);
        for &(b, d) in &links {
            let sb = self.cells[b as usize].site;
            rep.edges_added.push((pnew, sb));
            if too_long(d, rn, self.cells[b as usize].out_ub) {
                rep.edges_removed.push((pnew, sb));
            } else {
                self.connect(cnew, b, d);
            }
        }
        self.prune_into(&prune_cells, &mut rep.edges_removed);

        for &q in rep.changed.iter() {
            self.max_entries = self.max_entries.max(self.cells[q as usize].heap.len());
        }
        self.max_degree = self.max_degree.max(self.cells[cnew as usize].adj.len());
        for &b in std::iter::once(&c).chain(two_hop.iter()) {
            self.max_degree = self.max_degree.max(self.cells[b as usize].adj.len());
        }
        self.two_hop = two_hop;
        self.touches += rep.touches;
        Ok(())
    }

    /// Entries of cell `q` that may leave it for a new site at distance
    /// `d_new` from its site.
    fn candidates(&self, q: u32, d_new: T) -> Entries {
        let h = &self.cells[q as usize].heap;
        match self.scan {
            ScanMode::Full => h.iter().map(|m| m.entry).collect(),
            ScanMode::Pruned => {
                let thr = self.prune_factor * d_new;
                let mut out = Entries::new();
                let mut stack: SmallVec<[usize; 32]> = smallvec::smallvec![0];
                while let Some(i) = stack.pop() {
                    if i < h.len() && h[i].key > thr {
                        out.push(h[i].entry);
                        stack.push(2 * i + 1);
                        stack.push(2 * i + 2);
                    }
                }
                out
            }
        }
    }

    /// Locates `entries` of cell `q` against the new site; returns whether
    /// the cell changed.
    fn locate_all(
        &mut self,
        q: u32,
        cnew: u32,
        pnew: PointId,
        entries: Entries,
        rep: &mut InsertionReport<T>,
    ) -> bool {
        let site_q = self.cells[q as usize].site;
        let mut changed = false;
        // (entry, center, d_old, d_new)
        let mut work: SmallVec<[(u32, PointId, T, T); 16]> = SmallVec::with_capacity(entries.len());
        for e in entries {
            let m = self.member(e).expect("candidate is a member");
            let dn = if m.center == pnew {
                T::zero()
            } else {
                self.space.dist(m.center, pnew)
            };
            work.push((e, m.center, m.dist, dn));
        }
        while let Some((e, a, d_old, d_new)) = work.pop() {
            rep.touches += 1;
            if let Some(h) = self.histogram.as_mut() {
                if d_new > T::zero() {
                    let k = d_new.log2().floor().to_i32().unwrap_or(i32::MIN);
                    *h.entry((e, k)).or_insert(0) += 1;
                }
            }
            let r = self.hier.radius(e);
            match locate_rule(self.lazy, self.cell_approx, d_new, d_old, r) {
                Location::Stay => {
                    if self.cell_of_entry(e).is_none() {
                        self.add_member(q, e, d_old);
                        changed = true;
                    }
                }
                Location::Move => {
                    if self.cell_of_entry(e).is_some() {
                        self.remove_member(e);
                    }
                    self.add_member(cnew, e, d_new);
                    if a != pnew || self.hier.children(e).is_some() {
                        rep.moved.push(e);
                    }
                    changed = true;
                }
                Location::Split => {
                    let (l, rr) = self.hier.children(e).expect("split needs an internal node");
                    if self.cell_of_entry(e).is_some() {
                        self.remove_member(e);
                    }
                    changed = true;
                    rep.splits.push(SplitEvent {
                        entry: e,
                        center: a,
                        rad_ub: r,
                        kind: SplitKind::Move,
                        children: (l, rr),
                    });
                    let b = self.hier.center(rr);
                    let b_old = if b == site_q {
                        T::zero()
                    } else {
                        self.space.dist(b, site_q)
                    };
                    let b_new = if b == pnew {
                        T::zero()
                    } else {
                        self.space.dist(b, pnew)
                    };
                    work.push((rr, b, b_old, b_new));
                    work.push((l, a, d_old, d_new));
                }
            }
        }
        changed
    }

    /// Splits the largest members of `c` until `maxkey ≤ c·d(site, farthest)`.
    pub fn tidy_cell(&mut self, c: u32) -> Vec<SplitEvent<T>> {
        let mut rep = InsertionReport::empty(self.site(c), c);
        self.tidy_into(c, &mut rep);
        self.refresh_ub(c);
        self.max_entries = self.max_entries.max(self.cells[c as usize].heap.len());
        rep.splits
    }

    fn tidy_into(&mut self, c: u32, rep: &mut InsertionReport<T>) {
        loop {
            let Some(top) = self.cells[c as usize].heap.first().copied() else {
                break;
            };
            let far = self.farthest(c).map_or(T::zero(), |m| m.dist);
            if !(top.key > self.tidy_c * far) {
                break;
            }
            let Some((l, r)) = self.hier.children(top.entry) else {
                break;
            };
            self.remove_member(top.entry);
            rep.splits.push(SplitEvent {
                entry: top.entry,
                center: top.center,
                rad_ub: self.hier.radius(top.entry),
                kind: SplitKind::Tidy,
                children: (l, r),
            });
            self.add_member(c, l, top.dist);
            let b = self.hier.center(r);
            let s = self.cells[c as usize].site;
            let d = if b == s {
                T::zero()
            } else {
                self.space.dist(s, b)
            };
            self.add_member(c, r, d);
        }
    }

    /// Replaces a member by its children in the same cell.
    pub fn split_in_place(&mut self, entry: u32) -> Result<SplitEvent<T>> {
        let m = self
            .member(entry)
            .ok_or_else(|| Error::Contract(format!("entry {entry} is not stored")))?;
        let (l, r) = self
            .hier
            .children(entry)
            .ok_or_else(|| Error::Contract(format!("entry {entry} is a leaf")))?;
        let c = self.cell_of_entry(entry).expect("stored");
        self.remove_member(entry);
        self.add_member(c, l, m.dist);
        let b = self.hier.center(r);
        let s = self.cells[c as usize].site;
        let d = if b == s {
            T::zero()
        } else {
            self.space.dist(s, b)
        };
        self.add_member(c, r, d);
        self.max_entries = self.max_entries.max(self.cells[c as usize].heap.len());
        Ok(SplitEvent {
            entry,
            center: m.center,
            rad_ub: self.hier.radius(entry),
            kind: SplitKind::Refine,
            children: (l, r),
        })
    }

    /// Recomputes the stored radius bound of `c` from its top key.
    pub fn refresh_ub(&mut self, c: u32) {
        let cell = &mut self.cells[c as usize];
        cell.out_ub = cell.heap.first().map_or(T::zero(), |m| m.key);
        // a cell without members never gains new ones
        if cell.heap.is_empty() {
            cell.heap = Vec::new();
        }
    }

    /// Removes the edges incident to `cells` that exceed the pruning bound.
    pub fn prune_edges(&mut self, cells: &[u32]) -> Vec<(PointId, PointId)> {
        let mut removed = Vec::new();
        self.prune_into(cells, &mut removed);
        removed
    }

    fn prune_into(&mut self, cells: &[u32], removed: &mut Vec<(PointId, PointId)>) {
        for &a in cells {
            let mut i = 0;
            while i < self.cells[a as usize].adj.len() {
                let Edge { to: b, len: d } = self.cells[a as usize].adj[i];
                let ra = self.cells[a as usize].out_ub;
                let rb = self.cells[b as usize].out_ub;
                if too_long(d, ra, rb) {
                    self.cells[a as usize].adj.swap_remove(i);
                    let nb = &mut self.cells[b as usize].adj;
                    if let Some(j) = nb.iter().position(|e| e.to == a) {
                        nb.swap_remove(j);
                    }
                    trim(nb);
                    removed.push((self.cells[a as usize].site, self.cells[b as usize].site));
                } else {
                    i += 1;
                }
            }
            trim(&mut self.cells[a as usize].adj);
        }
    }

    /// Full copy of cells, members and edges, with member points expanded.
    pub fn snapshot(&self) -> Snapshot<T> {
        let cell_points = (0..self.cells.len())
            .map(|c| {
                let mut pts = vec![self.cells[c].site];
                for m in &self.cells[c].heap {
                    self.hier.for_each_point(m.entry, &mut |p| {
                        if p != self.cells[c].site {
                            pts.push(p)
                        }
                    });
                }
                pts
            })
            .collect();
        Snapshot {
            sites: self.cells.iter().map(|c| c.site).collect(),
            cell_points,
            members: self.cells.iter().map(|c| c.heap.clone()).collect(),
            out_ub: self.cells.iter().map(|c| c.out_ub).collect(),
            adj: self
                .cells
                .iter()
                .map(|c| c.adj.iter().map(|e| e.to).collect())
                .collect(),
            queue: None,
        }
    }

    fn bump_stamp(&mut self) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.cells.iter_mut().for_each(|c| c.mark = 0);
            self.stamp = 1;
        }
    }

    fn new_cell(&mut self, p: PointId) -> u32 {
        let c = self.cells.len() as u32;
        self.site_of.insert(p, c);
        self.cells.push(Cell {
            site: p,
            mark: 0,
            out_ub: T::zero(),
            heap: Vec::with_capacity(4),
            adj: Vec::new(),
        });
        c
    }

    /// Adds the edge `a`-`b` between sites at distance `len`.
    fn connect(&mut self, a: u32, b: u32, len: T) {
        self.cells[a as usize].adj.push(Edge { to: b, len });
        self.cells[b as usize].adj.push(Edge { to: a, len });
    }

    fn add_member(&mut self, c: u32, e: u32, dist: T) {
        let center = self.hier.center(e);
        let site = self.cells[c as usize].site;
        let r = self.hier.radius(e);
        if center == site && self.hier.children(e).is_none() {
            return;
        }
        if center != site && dist == T::zero() && self.duplicate.is_none() {
            self.duplicate = Some((site, center));
        }
        let h = &mut self.cells[c as usize].heap;
        h.push(Member {
            entry: e,
            center,
            dist,
            key: dist + r,
        });
        let i = h.len() - 1;
        self.slot[e as usize] = (c, i as u32);
        sift_up(h, &mut self.slot, i);
    }

    fn remove_member(&mut self, e: u32) -> Member<T> {
        let (c, p) = self.slot[e as usize];
        let h = &mut self.cells[c as usize].heap;
        let p = p as usize;
        let last = h.len() - 1;
        h.swap(p, last);
        self.slot[h[p].entry as usize].1 = p as u32;
        let out = h.pop().expect("nonempty");
        self.slot[e as usize] = NONE;
        if p < h.len() {
            let i = sift_up(h, &mut self.slot, p);
            sift_down(h, &mut self.slot, i);
        }
        out
    }
}

/// Pruning rule for an edge of length `d` between cells with radius bounds `ra` and `rb`.
#[inline]
fn too_long<T: Scalar>(d: T, ra: T, rb: T) -> bool {
    d > ra + rb + ra.max(rb)
}

/// Gives back most of the spare capacity once a list has shrunk to a quarter.
fn trim<E>(v: &mut Vec<E>) {
    if v.capacity() > 16 && 4 * v.len() <= v.capacity() {
        v.shrink_to(2 * v.len());
    }
}

fn sift_up<T: Scalar>(h: &mut [Member<T>], slot: &mut [(u32, u32)], mut i: usize) -> usize {
    while i > 0 {
        let p = (i - 1) / 2;
        if h[i].above(&h[p]) {
            h.swap(i, p);
            slot[h[i].entry as usize].1 = i as u32;
            slot[h[p].entry as usize].1 = p as u32;
            i = p;
        } else {
            break;
        }
    }
    i
}

fn sift_down<T: Scalar>(h: &mut [Member<T>], slot: &mut [(u32, u32)], mut i: usize) {
    loop {
        let l = 2 * i + 1;
        if l >= h.len() {
            break;
        }
        let r = l + 1;
        let c = if r < h.len() && h[r].above(&h[l]) {
            r
        } else {
            l
        };
        if h[c].above(&h[i]) {
            h.swap(c, i);
            slot[h[i].entry as usize].1 = i as u32;
            slot[h[c].entry as usize].1 = c as u32;
            i = c;
        } else {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{CoordSpace, Norm};

    type PointFvd<'a> = Fvd<'a, f64, CoordSpace<f64>, Points>;

    fn line4() -> CoordSpace<f64> {
        CoordSpace::line(&[0.0, 1.0, 3.0, 7.0], Norm::L2)
    }

    fn edges(f: &PointFvd<'_>) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for c in 0..f.cell_count() as u32 {
            for b in f.neighbors(c) {
                let (x, y) = (f.site(c).0, f.site(b).0);
                if x < y {
                    out.push((x, y));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn derived_constants() {
        let d = FvdConfig::default();
        assert_eq!(d.tau(), 24.0);
        assert!((d.theta() - 64.0 / 12.0).abs() < 1e-12);
        assert!((d.strong_packing() - 1.0 / 36.0).abs() < 1e-15);
        let k1 = FvdConfig {
            cell_approx: 1.0,
            ..d
        };
        assert!((k1.strong_packing() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(FvdConfig::EXACT.strong_packing(), 0.0);
        assert_eq!(FvdConfig::EXACT.degree_ceiling(1), 12.0);
        assert!(d.validate_bucketed().is_ok());
        assert!(FvdConfig::EXACT.validate_bucketed().is_err());
        assert!(FvdConfig {
            cell_approx: 1.0,
            ..d
        }
        .validate()
        .is_err());
    }

    #[test]
    fn init_single_cell() {
        let s = line4();
        let f = PointFvd::points(&s, PointId(0), &FvdConfig::EXACT, ScanMode::Full).unwrap();
        assert_eq!(f.cell_count(), 1);
        assert_eq!(f.out_radius_ub(0), 7.0);
        assert_eq!(f.members(0).len(), 3);
        let one = CoordSpace::line(&[5.0], Norm::L2);
        let g = PointFvd::points(&one, PointId(0), &FvdConfig::EXACT, ScanMode::Full).unwrap();
        assert_eq!(g.out_radius_ub(0), 0.0);
        assert!(!g.has_candidates(0));
        assert!(matches!(
            PointFvd::points(&s, PointId(4), &FvdConfig::EXACT, ScanMode::Full),
            Err(Error::InvalidPoint { .. })
        ));
    }

    #[test]
    fn init_node_mode_holds_roots() {
        let s = line4();
        let mut a = GreedyTree::leaf(PointId(0), crate::greedy_tree::TreeParams::EXACT);
        a.attach(PointId(0), PointId(1), 1.0).unwrap();
        a.finish();
        let mut b = GreedyTree::leaf(PointId(2), crate::greedy_tree::TreeParams::EXACT);
        b.attach(PointId(2), PointId(3), 4.0).unwrap();
        b.finish();
        let forest = Forest::new(vec![&a, &b]);
        let roots = [forest.root_entry(0), forest.root_entry(1)];
        let f = Fvd::new(
            &s,
            forest,
            &roots,
            PointId(0),
            &FvdConfig::default(),
            ScanMode::Pruned,
            true,
        )
        .unwrap();
        assert_eq!(f.members(0).len(), 2);
        assert_eq!(f.out_radius_ub(0), 7.0);
    }

    #[test]
    fn insertion_examples() {
        let s = line4();
        let mut f = PointFvd::points(&s, PointId(0), &FvdConfig::EXACT, ScanMode::Full).unwrap();
        let r = f.insert_site(0, PointId(3)).unwrap();
        assert_eq!(r.eps, 7.0);
        assert!(r.moved.is_empty());
        let mut v0: Vec<u32> = f.members(0).iter().map(|m| m.center.0).collect();
        v0.sort();
        assert_eq!(v0, vec![1, 2]);
        assert_eq!(f.members(1).len(), 0);
        assert_eq!(r.edges_added, vec![(PointId(3), PointId(0))]);
        // R(0) dropped to 3: 7 > 3 + 0 + 3 prunes the new edge right away
        assert_eq!(r.edges_removed.len(), 1);

        let r = f.insert_site(0, PointId(2)).unwrap();
        assert_eq!(r.eps, 3.0);
        let v0: Vec<u32> = f.members(0).iter().map(|m| m.center.0).collect();
        assert_eq!(v0, vec![1]);
        assert_eq!(f.out_radius_ub(0), 1.0);
        // 3 -> 0 is 3 > 1 + 0 + 1, pruned as well
        assert_eq!(edges(&f), vec![]);
        assert!(f.insert_site(0, PointId(2)).is_err());
        assert!(f.insert_site(0, PointId(3)).is_err());
    }

    #[test]
    fn two_point_universe() {
        let s = CoordSpace::line(&[0.0, 1.0], Norm::L2);
        let mut f = PointFvd::points(&s, PointId(0), &FvdConfig::EXACT, ScanMode::Full).unwrap();
        let r = f.insert_site(0, PointId(1)).unwrap();
        assert_eq!(f.out_radius_ub(0), 0.0);
        assert_eq!(f.out_radius_ub(1), 0.0);
        assert_eq!(r.edges_added.len(), 1);
        assert_eq!(r.edges_removed.len(), 1);
    }

    #[test]
    fn locate_rule_examples() {
        assert_eq!(locate_rule(1.0, 2.0, 1.0, 5.0, 1.0), Location::Move);
        assert_eq!(locate_rule(1.0, 2.0, 5.0, 1.0, 0.5), Location::Stay);
        assert_eq!(locate_rule(1.0, 1.0, 2.0, 2.0, 0.0), Location::Stay);
        assert_eq!(locate_rule(1.0, 1.0, 2.0, 2.5, 1.0), Location::Split);
    }

    #[test]
    fn prune_examples() {
        let s = CoordSpace::line(&[0.0, 1.0, 5.0, 9.0], Norm::L2);
        let mut f = PointFvd::points(&s, PointId(0), &FvdConfig::EXACT, ScanMode::Full).unwrap();
        f.cells[0].adj.clear();
        let c1 = f.new_cell(PointId(1));
        f.connect(0, c1, 1.0);
        f.cells[0].out_ub = 0.0;
        f.cells[c1 as usize].out_ub = 0.0;
        assert_eq!(f.prune_edges(&[0]).len(), 1);

        let c2 = f.new_cell(PointId(2));
        f.connect(0, c2, 5.0);
        f.cells[0].out_ub = 1.0;
        f.cells[c2 as usize].out_ub = 2.0;
        assert!(f.prune_edges(&[0, c2]).is_empty());
        assert_eq!(f.neighbors(0).collect::<Vec<_>>(), vec![c2]);
    }

    #[test]
    fn two_hop_examples() {
        let s = CoordSpace::line(&[0.0, 1.0, 2.0, 3.0, 4.0], Norm::L2);
        let mut f = PointFvd::points(&s, PointId(0), &FvdConfig::EXACT, ScanMode::Full).unwrap();
        for p in 1..5 {
            f.new_cell(PointId(p));
        }
        assert!(f.neighbors_within_two_hops(0).is_empty());
        let link = |f: &mut PointFvd<'_>, a: u32, b: u32| {
            f.connect(a, b, 1.0);
        };
        link(&mut f, 0, 1);
        link(&mut f, 1, 2);
        let mut h = f.neighbors_within_two_hops(0);
        h.sort();
        assert_eq!(h, vec![1, 2]);
        // star around 1 with leaves 0, 2, 3, 4
        link(&mut f, 1, 3);
        link(&mut f, 1, 4);
        let mut h = f.neighbors_within_two_hops(3);
        h.sort();
        assert_eq!(h, vec![0, 1, 2, 4]);
    }

    #[test]
    fn tidy_examples() {
        let s = line4();
        let mut t = GreedyTree::leaf(PointId(0), crate::greedy_tree::TreeParams::EXACT);
        t.attach(PointId(0), PointId(3), 7.0).unwrap();
        t.attach(PointId(0), PointId(2), 3.0).unwrap();
        t.attach(PointId(0), PointId(1), 1.0).unwrap();
        t.finish();
        let forest = Forest::new(vec![&t]);
        let root = forest.root_entry(0);
        let mut f = Fvd::new(
            &s,
            forest,
            &[root],
            PointId(0),
            &FvdConfig::default(),
            ScanMode::Pruned,
            true,
        )
        .unwrap();
        assert_eq!(f.out_radius_ub(0), 7.0);
        assert_eq!(f.farthest(0).unwrap().dist, 0.0);
        let splits = f.tidy_cell(0);
        assert_eq!(splits.len(), 1);
        assert_eq!(f.farthest(0).unwrap().center, PointId(3));
        // maxkey 7 = farthest 7
        assert!(f.tidy_cell(0).is_empty());

        let mut g =
            PointFvd::points(&s, PointId(0), &FvdConfig::default(), ScanMode::Pruned).unwrap();
        assert!(g.tidy_cell(0).is_empty());
    }

    #[test]
    fn pruned_scan_matches_full_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 60;
            let coords: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
            let s = CoordSpace::new(coords, 2, Norm::L2).unwrap();
            let cfg = FvdConfig::default();
            let mut a = PointFvd::points(&s, PointId(0), &cfg, ScanMode::Full).unwrap();
            let mut b = PointFvd::points(&s, PointId(0), &cfg, ScanMode::Pruned).unwrap();
            for _ in 1..n {
                let c = (0..a.cell_count() as u32)
                    .filter(|&c| a.has_candidates(c))
                    .max_by(|&x, &y| {
                        a.out_radius_ub(x)
                            .partial_cmp(&a.out_radius_ub(y))
                            .unwrap()
                            .then(y.cmp(&x))
                    })
                    .unwrap();
                let ra = a.insert_farthest(c).unwrap();
                let rb = b.insert_farthest(c).unwrap();
                assert_eq!(ra.site, rb.site);
                let mut ma = ra.moved.clone();
                let mut mb = rb.moved.clone();
                ma.sort();
                mb.sort();
                assert_eq!(ma, mb);
                assert!(rb.touches <= ra.touches);
            }
        }
    }
}
