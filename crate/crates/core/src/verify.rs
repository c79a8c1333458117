//! Brute-force oracles and invariant checkers.
//!
//! Every check here works from distances and plain snapshots only. An
//! inequality `a ≤ b` passes when `a ≤ b·(1 + 1e-9)`; strict inequalities
//! get the same slack on the satisfied side.

use std::collections::HashMap;
use std::fmt;

use crate::algorithms::Observer;
use crate::fvd::{Forest, FvdConfig, InsertionReport, Snapshot, SplitEvent, SplitKind};
use crate::greedy_tree::{GreedyTree, NodeId, Permutation, TreeParams};
use crate::metric::{CoordSpace, Metric, PointId};
use crate::scalar::Scalar;

/// Relative slack on the satisfied side of every inequality.
pub const SLACK: f64 = 1e-9;

#[inline]
fn le(a: f64, b: f64) -> bool {
    a <= b + SLACK * b.abs()
}

#[inline]
fn gt(a: f64, b: f64) -> bool {
    a + SLACK * a.abs() > b
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The checked statement has no content for these inputs.
    Vacuous,
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub check: &'static str,
    pub status: Status,
    /// Indices and values reproducing the worst violation.
    pub witness: Option<String>,
    /// Achieved constant, when the check has one.
    pub measured: Option<f64>,
}

impl Report {
    pub fn pass(check: &'static str) -> Self {
        Report {
            check,
            status: Status::Pass,
            witness: None,
            measured: None,
        }
    }

    pub fn fail(check: &'static str, witness: String) -> Self {
        Report {
            check,
            status: Status::Fail,
            witness: Some(witness),
            measured: None,
        }
    }

    pub fn vacuous(check: &'static str) -> Self {
        Report {
            check,
            status: Status::Vacuous,
            witness: None,
            measured: None,
        }
    }

    pub fn with_measured(mut self, m: f64) -> Self {
        self.measured = Some(m);
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    fn from(check: &'static str, violation: Option<String>) -> Self {
        match violation {
            None => Report::pass(check),
            Some(w) => Report::fail(check, w),
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Vacuous => "VACUOUS",
        };
        write!(f, "{} {s}", self.check)?;
        if let Some(m) = self.measured {
            write!(f, " measured={m}")?;
        }
        if let Some(w) = &self.witness {
            write!(f, " witness: {w}")?;
        }
        Ok(())
    }
}

/// True when every report passed or was vacuous.
pub fn all_passed(reports: &[Report]) -> bool {
    reports.iter().all(Report::passed)
}

fn d<T: Scalar, M: Metric<T> + ?Sized>(space: &M, a: PointId, b: PointId) -> f64 {
    if a == b {
        0.0
    } else {
        space.dist(a, b).as_f64()
    }
}

/// Greedy factor of `order` and the rank that attains it.
fn greedy_factor_at<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    order: &[PointId],
) -> (f64, usize) {
    let n = space.len();
    if order.len() < 2 {
        return (1.0, 0);
    }
    let mut nn: Vec<f64> = (0..n)
        .map(|i| d(space, PointId(i as u32), order[0]))
        .collect();
    let mut worst = (1.0, 0);
    for (i, &p) in order.iter().enumerate().skip(1) {
        let far = nn.iter().copied().fold(0.0, f64::max);
        let here = nn[p.index()];
        let ratio = if here > 0.0 {
            far / here
        } else if far > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        if ratio > worst.0 {
            worst = (ratio, i);
        }
        for (q, v) in nn.iter_mut().enumerate() {
            let x = d(space, PointId(q as u32), p);
            if x < *v {
                *v = x;
            }
        }
    }
    worst
}

/// Smallest `c` with `c·d(p_i, P_i) ≥ max_p d(p, P_i)` for every `i ≥ 1`,
/// where `P_i` holds the first `i` points. A zero insertion distance with a
/// positive farthest distance gives infinity. `O(n²)`.
pub fn greedy_factor<T: Scalar, M: Metric<T> + ?Sized>(space: &M, perm: &Permutation<T>) -> f64 {
    greedy_factor_at(space, &perm.order()).0
}

/// Checks that `perm` covers the space, records true predecessor distances
/// and is `claim`-greedy.
pub fn verify_permutation<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    perm: &Permutation<T>,
    claim: f64,
) -> Vec<Report> {
    let mut out = Vec::new();
    if let Err(e) = perm.validate(space.len()) {
        out.push(Report::fail("perm.cover", e.to_string()));
        return out;
    }
    out.push(Report::pass("perm.cover"));
    let mut bad = None;
    for (i, e) in perm.entries.iter().enumerate().skip(1) {
        let pred = e.pred.expect("validated");
        let t = d(space, e.point, pred);
        if (t - e.eps.as_f64()).abs() > SLACK * t.max(1.0) {
            bad = Some(format!(
                "rank {i}: point {} pred {pred} eps {} but d = {t}",
                e.point, e.eps
            ));
            break;
        }
    }
    out.push(Report::from("perm.eps", bad));
    let (f, at) = greedy_factor_at(space, &perm.order());
    let r = if le(f, claim) {
        Report::pass("perm.greedy")
    } else {
        Report::fail(
            "perm.greedy",
            format!(
                "rank {at} point {} factor {f} > {claim}",
                perm.entries[at].point
            ),
        )
    };
    out.push(r.with_measured(f));
    out
}

/// Checks `α`-scaling, `δ`-approximation against the heap-order prefix and
/// that the heap-order traversal is `γ_T`-greedy.
pub fn verify_tree<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    tree: &GreedyTree<T>,
    params: TreeParams,
) -> Vec<Report> {
    let n = space.len();
    let mut out = Vec::new();
    if tree.len() != n {
        out.push(Report::fail(
            "tree.cover",
            format!("tree has {} points, space has {n}", tree.len()),
        ));
        return out;
    }
    out.push(Report::pass("tree.cover"));

    let mut bad = None;
    for r in tree.records() {
        let Some(p) = r.pred else { continue };
        let t = d(space, r.point, p);
        if (t - r.eps.as_f64()).abs() > SLACK * t.max(1.0) {
            bad = Some(format!(
                "point {} pred {p} eps {} but d = {t}",
                r.point, r.eps
            ));
            break;
        }
    }
    out.push(Report::from("tree.eps", bad));

    let mut worst = 0.0f64;
    let mut bad = None;
    for r in tree.records() {
        let Some(p) = r.pred else { continue };
        let Some(ep) = tree.eps(p) else { continue };
        let ea = r.eps.as_f64();
        let ep = ep.as_f64();
        if ep > 0.0 {
            worst = worst.max(ea / ep);
        }
        if bad.is_none() && !le(ea, ep / params.alpha) {
            bad = Some(format!(
                "point {} eps {ea} > eps of pred {p} ({ep}) / alpha {}",
                r.point, params.alpha
            ));
        }
    }
    out.push(Report::from("tree.scaling", bad).with_measured(worst));

    let trav = tree.heap_order_traversal();
    let order = trav.order();
    let mut nn: Vec<f64> = (0..n)
        .map(|i| d(space, PointId(i as u32), order[0]))
        .collect();
    let mut in_prefix = vec![false; n];
    in_prefix[order[0].index()] = true;
    let mut worst = 0.0f64;
    let mut bad = None;
    for (i, e) in trav.entries.iter().enumerate().skip(1) {
        let a = e.point;
        let pred = e.pred.expect("traversal entries have preds");
        if bad.is_none() && !in_prefix[pred.index()] {
            bad = Some(format!(
                "rank {i}: pred {pred} of {a} comes later in the traversal"
            ));
        }
        let ea = e.eps.as_f64();
        let near = nn[a.index()];
        if near > 0.0 {
            worst = worst.max(ea / near);
        }
        if bad.is_none() && !le(ea, params.delta * near) {
            bad = Some(format!(
                "rank {i}: point {a} eps {ea} > delta {} * d(a, prefix) {near}",
                params.delta
            ));
        }
        in_prefix[a.index()] = true;
        for (q, v) in nn.iter_mut().enumerate() {
            let x = d(space, PointId(q as u32), a);
            if x < *v {
                *v = x;
            }
        }
    }
    out.push(Report::from("tree.approximate", bad).with_measured(worst));

    let (f, at) = greedy_factor_at(space, &order);
    let r = if le(f, params.gamma) {
        Report::pass("tree.greedy")
    } else {
        Report::fail(
            "tree.greedy",
            format!(
                "traversal rank {at} point {} factor {f} > {}",
                order[at], params.gamma
            ),
        )
    };
    out.push(r.with_measured(f));
    out
}

/// Leaf-order intervals: `pos[p]` is the rank of point `p` among leaves and
/// `span[x] = [lo, hi)` the leaf ranks below node `x`.
fn euler<T: Scalar>(tree: &GreedyTree<T>, n: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut pos = vec![usize::MAX; n];
    let mut span = vec![(0, 0); tree.node_count()];
    let mut next = 0;
    let mut stack = vec![(tree.root(), false)];
    while let Some((x, done)) = stack.pop() {
        let node = tree.node(x);
        if done {
            let (l, r) = node.children().expect("internal");
            span[x.index()] = (span[l.index()].0, span[r.index()].1);
            continue;
        }
        match node.children() {
            None => {
                pos[node.center.index()] = next;
                span[x.index()] = (next, next + 1);
                next += 1;
            }
            Some((l, r)) => {
                stack.push((x, true));
                stack.push((r, false));
                stack.push((l, false));
            }
        }
    }
    (pos, span)
}

/// For every internal node `x`, every point within `π·split_dist(x)` of its
/// center lies below `x`. Vacuous for `π ≤ 0`.
pub fn verify_strong_packing<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    tree: &GreedyTree<T>,
    pi: f64,
) -> Report {
    const CHECK: &str = "tree.strong_packing";
    if pi <= 0.0 {
        return Report::vacuous(CHECK);
    }
    let n = space.len();
    if tree.len() != n {
        return Report::fail(
            CHECK,
            format!("tree has {} points, space has {n}", tree.len()),
        );
    }
    let (pos, span) = euler(tree, n);
    let mut tightest = f64::INFINITY;
    for (i, node) in tree.nodes().iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let (lo, hi) = span[i];
        let rad = pi * node.split_dist.as_f64();
        for q in 0..n {
            let k = pos[q];
            if k >= lo && k < hi {
                continue;
            }
            let dq = d(space, node.center, PointId(q as u32));
            if node.split_dist.as_f64() > 0.0 {
                tightest = tightest.min(dq / node.split_dist.as_f64());
            }
            if !gt(dq, rad) {
                return Report::fail(
                    CHECK,
                    format!(
                        "node {i} center {} split {} : point {q} outside the node at distance {dq} <= {rad}",
                        node.center, node.split_dist
                    ),
                );
            }
        }
    }
    Report::pass(CHECK).with_measured(tightest)
}

/// Exact radius of every node.
fn exact_radii<T: Scalar, M: Metric<T> + ?Sized>(space: &M, tree: &GreedyTree<T>) -> Vec<f64> {
    (0..tree.node_count())
        .map(|i| tree.exact_radius(NodeId(i as u32), space).as_f64())
        .collect()
}

/// Centers of an antichain whose parents have radius at least `r` are
/// `((α−1)/(α·δ·γ_T))·r`-separated. The antichain taken for each `r` is the
/// set of topmost nodes with radius below `r`. Vacuous when `α ≤ 1`.
pub fn verify_net_packing<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    tree: &GreedyTree<T>,
    rs: &[f64],
) -> Report {
    const CHECK: &str = "tree.net_packing";
    let p = tree.params();
    if p.alpha <= 1.0 {
        return Report::vacuous(CHECK);
    }
    let coef = (p.alpha - 1.0) / (p.alpha * p.delta * p.gamma);
    let rad = exact_radii(space, tree);
    for &r in rs {
        let mut anti = Vec::new();
        let mut stack: Vec<NodeId> = match tree.node(tree.root()).children() {
            Some((l, rr)) if rad[0] >= r => vec![l, rr],
            _ => continue,
        };
        while let Some(x) = stack.pop() {
            if rad[x.index()] < r {
                anti.push(tree.node(x).center);
            } else if let Some((l, rr)) = tree.node(x).children() {
                stack.push(l);
                stack.push(rr);
            }
        }
        for i in 0..anti.len() {
            for j in i + 1..anti.len() {
                let dd = d(space, anti[i], anti[j]);
                if !le(coef * r, dd) {
                    return Report::fail(
                        CHECK,
                        format!(
                            "r {r}: centers {} and {} at {dd} < {}",
                            anti[i],
                            anti[j],
                            coef * r
                        ),
                    );
                }
            }
        }
    }
    Report::pass(CHECK)
}

/// From the heap-order traversal: every point is within `γ²·ε_a` of the
/// prefix before `a`.
pub fn verify_covering<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    tree: &GreedyTree<T>,
    gamma: f64,
) -> Report {
    const CHECK: &str = "tree.covering";
    let n = space.len();
    let trav = tree.heap_order_traversal();
    let order = trav.order();
    if order.len() != n {
        return Report::fail(
            CHECK,
            format!("traversal has {} points, space has {n}", order.len()),
        );
    }
    let mut nn: Vec<f64> = (0..n)
        .map(|i| d(space, PointId(i as u32), order[0]))
        .collect();
    let mut worst = 0.0f64;
    for (i, e) in trav.entries.iter().enumerate().skip(1) {
        let (far_q, far) =
            nn.iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |b, (q, v)| if v > b.1 { (q, v) } else { b });
        let eps = e.eps.as_f64();
        if eps > 0.0 {
            worst = worst.max(far / eps);
        }
        if !le(far, gamma * gamma * eps) {
            return Report::fail(
                CHECK,
                format!(
                    "rank {i} point {}: point {far_q} at {far} > gamma^2 * eps {eps}",
                    e.point
                ),
            );
        }
        for (q, v) in nn.iter_mut().enumerate() {
            let x = d(space, PointId(q as u32), e.point);
            if x < *v {
                *v = x;
            }
        }
    }
    Report::pass(CHECK).with_measured(worst)
}

/// Result of [`packing_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct PackingCheck {
    /// Pairwise distances are at least `r`.
    pub packed: bool,
    /// Every point is within `radius` of the center.
    pub covered: bool,
    pub size: usize,
}

impl PackingCheck {
    /// Whether `size ≤ (4R/r)^d`.
    pub fn within(&self, radius: f64, r: f64, dim: u32) -> bool {
        (self.size as f64) <= packing_bound(radius, r, dim)
    }
}

/// Standard packing bound `(4R/r)^d`.
pub fn packing_bound(radius: f64, r: f64, dim: u32) -> f64 {
    (4.0 * radius / r).powi(dim as i32)
}

/// Checks that `pts` is `r`-packed and inside the ball of `radius` around
/// the coordinate `center`.
pub fn packing_check<T: Scalar>(
    space: &CoordSpace<T>,
    pts: &[PointId],
    r: f64,
    center: &[T],
    radius: f64,
) -> PackingCheck {
    let mut packed = true;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if d(space, pts[i], pts[j]) < r {
                packed = false;
            }
        }
    }
    let covered = pts
        .iter()
        .all(|&p| le(space.dist_to_coords(p, center).as_f64(), radius));
    PackingCheck {
        packed,
        covered,
        size: pts.len(),
    }
}

/// Maximum degree of this configuration's neighbor graph at dimension `d`.
pub fn degree_ceiling(cfg: &FvdConfig, dim: u32) -> f64 {
    cfg.degree_ceiling(dim)
}

/// Exact out-radius of every cell of a snapshot.
pub fn out_radii<T: Scalar, M: Metric<T> + ?Sized>(space: &M, snap: &Snapshot<T>) -> Vec<f64> {
    snap.sites
        .iter()
        .zip(&snap.cell_points)
        .map(|(&s, pts)| pts.iter().map(|&p| d(space, s, p)).fold(0.0, f64::max))
        .collect()
}

/// Brute-force checks of one diagram snapshot: partition, Cell Invariant
/// with factor `κ`, Neighbor Invariant, radius bound soundness, pruning
/// bound, aspect ratio `τ`, optional degree limit and, when the snapshot
/// carries queue state, the Heap Invariant.
pub fn verify_fvd_snapshot<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    snap: &Snapshot<T>,
    cfg: &FvdConfig,
    degree_limit: Option<usize>,
) -> Vec<Report> {
    let n = space.len();
    let k = snap.sites.len();
    let mut out = Vec::new();

    // partition
    let mut owner = vec![u32::MAX; n];
    let mut bad = None;
    for (c, pts) in snap.cell_points.iter().enumerate() {
        if pts.first() != Some(&snap.sites[c]) {
            bad.get_or_insert_with(|| {
                format!("cell {c} does not start with its site {}", snap.sites[c])
            });
        }
        for &p in pts {
            if p.index() >= n {
                bad.get_or_insert_with(|| format!("cell {c} holds invalid point {p}"));
            } else if owner[p.index()] != u32::MAX {
                bad.get_or_insert_with(|| {
                    format!("point {p} in cells {} and {c}", owner[p.index()])
                });
            } else {
                owner[p.index()] = c as u32;
            }
        }
    }
    if let Some(p) = owner.iter().position(|&o| o == u32::MAX) {
        bad.get_or_insert_with(|| format!("point {p} is in no cell"));
    }
    let ok = bad.is_none();
    out.push(Report::from("fvd.partition", bad));
    if !ok {
        return out;
    }

    // cell invariant
    let mut worst = 1.0f64;
    let mut bad = None;
    for p in 0..n {
        let pp = PointId(p as u32);
        let c = owner[p] as usize;
        let own = d(space, snap.sites[c], pp);
        let (best_c, best) = snap
            .sites
            .iter()
            .enumerate()
            .map(|(q, &s)| (q, d(space, s, pp)))
            .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
        if best > 0.0 {
            worst = worst.max(own / best);
        }
        if bad.is_none() && !le(own, cfg.cell_approx * best) {
            bad = Some(format!(
                "point {pp} in cell of {} at {own} > kappa {} * d to site {} ({best})",
                snap.sites[c], cfg.cell_approx, snap.sites[best_c]
            ));
        }
    }
    out.push(Report::from("fvd.cell", bad).with_measured(worst));

    // graph well-formed
    let mut bad = None;
    let mut edge = vec![Vec::new(); k];
    for (a, nb) in snap.adj.iter().enumerate() {
        for &b in nb {
            if b as usize == a {
                bad.get_or_insert_with(|| format!("self loop at {}", snap.sites[a]));
            } else if !snap.adj[b as usize].contains(&(a as u32)) {
                bad.get_or_insert_with(|| {
                    format!(
                        "edge {}-{} is one-sided",
                        snap.sites[a], snap.sites[b as usize]
                    )
                });
            }
            edge[a].push(b);
        }
    }
    for e in edge.iter_mut() {
        e.sort_unstable();
    }
    out.push(Report::from("fvd.graph", bad));
    let has_edge = |a: usize, b: usize| edge[a].binary_search(&(b as u32)).is_ok();

    // neighbor invariant
    let mut bad = None;
    'outer: for bp in 0..n {
        let b = owner[bp] as usize;
        let t = d(space, snap.sites[b], PointId(bp as u32));
        if t == 0.0 {
            continue;
        }
        for ap in 0..n {
            let a = owner[ap] as usize;
            if a == b || has_edge(a, b) {
                continue;
            }
            let x = d(space, PointId(ap as u32), PointId(bp as u32));
            if x < t && !le(t, x) {
                bad = Some(format!(
                    "points {ap} (cell {}) and {bp} (cell {}) at {x} < d({bp}, site) {t} but no edge",
                    snap.sites[a], snap.sites[b]
                ));
                break 'outer;
            }
        }
    }
    out.push(Report::from("fvd.neighbor", bad));

    // radius bounds and pruning
    let radii = out_radii(space, snap);
    let mut bad = None;
    for c in 0..k {
        let ub = snap.out_ub[c].as_f64();
        if !le(radii[c], ub) {
            bad = Some(format!(
                "cell of {}: out-radius {} > stored bound {ub}",
                snap.sites[c], radii[c]
            ));
            break;
        }
    }
    out.push(Report::from("fvd.radius_ub", bad));
    let mut bad = None;
    for a in 0..k {
        for &b in &edge[a] {
            let b = b as usize;
            let (ra, rb) = (snap.out_ub[a].as_f64(), snap.out_ub[b].as_f64());
            let dab = d(space, snap.sites[a], snap.sites[b]);
            if !le(dab, ra + rb + ra.max(rb)) {
                bad.get_or_insert_with(|| {
                    format!(
                        "edge {}-{} of length {dab} exceeds {ra} + {rb} + max",
                        snap.sites[a], snap.sites[b]
                    )
                });
            }
        }
    }
    out.push(Report::from("fvd.pruning", bad));

    // aspect ratio
    let tau = cfg.tau();
    let mut inrad = vec![f64::INFINITY; k];
    for p in 0..n {
        let pp = PointId(p as u32);
        for (c, &s) in snap.sites.iter().enumerate() {
            if owner[p] as usize != c {
                let x = d(space, s, pp);
                if x < inrad[c] {
                    inrad[c] = x;
                }
            }
        }
    }
    let mut worst = 0.0f64;
    let mut bad = None;
    for c in 0..k {
        if radii[c] == 0.0 || !inrad[c].is_finite() {
            continue;
        }
        let ratio = if inrad[c] > 0.0 {
            radii[c] / inrad[c]
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if bad.is_none() && !le(radii[c], tau * inrad[c]) {
            bad = Some(format!(
                "cell of {}: R {} / inrad {} > tau {tau}",
                snap.sites[c], radii[c], inrad[c]
            ));
        }
    }
    out.push(Report::from("fvd.aspect_ratio", bad).with_measured(worst));

    // degree
    let deg = snap.adj.iter().map(Vec::len).max().unwrap_or(0);
    let r = match degree_limit {
        Some(lim) if deg > lim => {
            let c = snap
                .adj
                .iter()
                .position(|a| a.len() == deg)
                .expect("max exists");
            Report::fail(
                "fvd.degree",
                format!("cell of {} has degree {deg} > {lim}", snap.sites[c]),
            )
        }
        _ => Report::pass("fvd.degree"),
    };
    out.push(r.with_measured(deg as f64));

    // heap invariant
    if let Some(q) = &snap.queue {
        let r = match q.head {
            Some((h, false)) => {
                let top = radii[h as usize];
                let mut bad = None;
                for &(c, _, _) in &q.entries {
                    if !le(radii[c as usize], cfg.heap_approx * top) {
                        bad = Some(format!(
                            "queued cell of {} has R {} > gamma {} * R of head {} ({top})",
                            snap.sites[c as usize],
                            radii[c as usize],
                            cfg.heap_approx,
                            snap.sites[h as usize]
                        ));
                        break;
                    }
                }
                Report::from("fvd.heap", bad)
            }
            _ => Report::vacuous("fvd.heap"),
        };
        out.push(r);
    }
    out
}

/// Empty Annulus: no point `a` with `R(p) < d(p, a) ≤ θ·R(p)` for a cell at
/// the moment it goes on the backburner.
pub fn verify_empty_annulus<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    snap: &Snapshot<T>,
    cell: u32,
    theta: f64,
) -> Report {
    const CHECK: &str = "bb.empty_annulus";
    let c = cell as usize;
    let site = snap.sites[c];
    let r = snap.cell_points[c]
        .iter()
        .map(|&p| d(space, site, p))
        .fold(0.0, f64::max);
    if r == 0.0 {
        return Report::vacuous(CHECK);
    }
    let mut nearest_out = f64::INFINITY;
    for q in 0..space.len() {
        let x = d(space, site, PointId(q as u32));
        if x > r {
            nearest_out = nearest_out.min(x);
            if x > r * (1.0 + SLACK) && x * (1.0 + SLACK) <= theta * r {
                return Report::fail(
                    CHECK,
                    format!("cell of {site}: R {r}, point {q} at {x} <= theta {theta} * R"),
                );
            }
        }
    }
    Report::pass(CHECK).with_measured(nearest_out / r)
}

/// Isolation: a cell leaving the backburner has no neighbors.
pub fn verify_isolation(cell: u32, site: Option<PointId>, degree: usize) -> Report {
    const CHECK: &str = "bb.isolation";
    if degree == 0 {
        Report::pass(CHECK)
    } else {
        let who = site.map_or(format!("cell {cell}"), |s| format!("cell of {s}"));
        Report::fail(
            CHECK,
            format!("{who} left the backburner with {degree} neighbors"),
        )
    }
}

/// Split radius lower bounds: for each member `x` whose parent `x'` was
/// split (by tidying or split-on-move), `rad(x')` exceeds the matching
/// coefficient times the exact out-radius of the cell now holding `x`.
pub fn verify_sparsity_and_splits<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    forest: &Forest<'_, T>,
    snap: &Snapshot<T>,
    provenance: &HashMap<u32, (u32, SplitKind)>,
    cfg: &FvdConfig,
    cache: &mut HashMap<u32, f64>,
) -> Report {
    const CHECK: &str = "fvd.split_radius";
    let tau = cfg.tau();
    let (l, k, g, c) = (cfg.lazy, cfg.cell_approx, cfg.heap_approx, cfg.tidy());
    let tidy = (c - 1.0) * l / (c * c * tau * (l + 1.0));
    let mv = (k - l) / (2.0 * k * g * tau * (l + 1.0) * (k + 1.0));
    let radii = out_radii(space, snap);
    let mut worst = f64::INFINITY;
    for (cell, members) in snap.members.iter().enumerate() {
        let rp = radii[cell];
        if rp == 0.0 {
            continue;
        }
        for m in members {
            let Some(&(parent, kind)) = provenance.get(&m.entry) else {
                continue;
            };
            let coef = match kind {
                SplitKind::Tidy => tidy,
                SplitKind::Move => mv,
                SplitKind::Refine => continue,
            };
            let rad = *cache.entry(parent).or_insert_with(|| {
                let (t, _, node) = forest.locate(parent);
                t.exact_radius(node, space).as_f64()
            });
            worst = worst.min(rad / (coef * rp));
            if !gt(rad, coef * rp) {
                return Report::fail(
                    CHECK,
                    format!(
                        "entry {} in cell of {}: parent {parent} ({kind:?}) radius {rad} <= {coef} * R {rp}",
                        m.entry, snap.sites[cell]
                    ),
                );
            }
        }
    }
    Report::pass(CHECK).with_measured(worst)
}

fn merge_report(slot: &mut Report, r: Report) {
    if slot.status == Status::Fail {
        return;
    }
    let measured = match (slot.measured, r.measured) {
        (Some(a), Some(b)) => Some(
            if r.check == "fvd.split_radius" || r.check == "bb.empty_annulus" {
                a.min(b)
            } else {
                a.max(b)
            },
        ),
        (a, b) => a.or(b),
    };
    match r.status {
        Status::Fail => *slot = r,
        Status::Pass => {
            slot.status = Status::Pass;
            slot.measured = measured;
        }
        Status::Vacuous => slot.measured = measured,
    }
}

/// Observer that checks snapshots as a run progresses.
///
/// Snapshots are taken every insertion for `n ≤ 500` and every `⌈n/100⌉`-th
/// insertion above. Backburner events are always checked. With a forest,
/// split radius bounds are checked too.
pub struct Auditor<'a, T: Scalar, M: ?Sized> {
    space: &'a M,
    cfg: FvdConfig,
    every: usize,
    degree_limit: Option<usize>,
    forest: Option<Forest<'a, T>>,
    provenance: HashMap<u32, (u32, SplitKind)>,
    rad_cache: HashMap<u32, f64>,
    reports: Vec<Report>,
    snapshots: usize,
    bb_entries: usize,
    bb_removals: usize,
    last_sites: Vec<PointId>,
}

impl<'a, T: Scalar, M: Metric<T> + ?Sized> Auditor<'a, T, M> {
    pub fn new(space: &'a M, cfg: &FvdConfig) -> Self {
        let n = space.len();
        let every = if n <= 500 { 1 } else { n.div_ceil(100) };
        Auditor {
            space,
            cfg: *cfg,
            every,
            degree_limit: None,
            forest: None,
            provenance: HashMap::new(),
            rad_cache: HashMap::new(),
            reports: Vec::new(),
            snapshots: 0,
            bb_entries: 0,
            bb_removals: 0,
            last_sites: Vec::new(),
        }
    }

    /// Checks split radius bounds for a merge of these trees.
    pub fn with_trees(mut self, trees: Vec<&'a GreedyTree<T>>) -> Self {
        self.forest = Some(Forest::new(trees));
        self
    }

    pub fn with_degree_limit(mut self, limit: usize) -> Self {
        self.degree_limit = Some(limit);
        self
    }

    /// Overrides the snapshot period.
    pub fn every(mut self, k: usize) -> Self {
        self.every = k.max(1);
        self
    }

    pub fn snapshots_checked(&self) -> usize {
        self.snapshots
    }

    pub fn backburner_entries(&self) -> usize {
        self.bb_entries
    }

    pub fn backburner_removals(&self) -> usize {
        self.bb_removals
    }

    /// One aggregated report per check: the first failure, else the
    /// extreme measured value.
    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    pub fn passed(&self) -> bool {
        all_passed(&self.reports)
    }

    fn add(&mut self, r: Report) {
        match self.reports.iter_mut().find(|x| x.check == r.check) {
            Some(slot) => merge_report(slot, r),
            None => self.reports.push(r),
        }
    }

    fn expect(&mut self, check: &'static str) {
        if !self.reports.iter().any(|x| x.check == check) {
            self.reports.push(Report::vacuous(check));
        }
    }

    fn record_splits(&mut self, splits: &[SplitEvent<T>]) {
        for s in splits {
            self.provenance.insert(s.children.0, (s.entry, s.kind));
            self.provenance.insert(s.children.1, (s.entry, s.kind));
        }
    }

    fn check(&mut self, snap: &Snapshot<T>) {
        self.snapshots += 1;
        self.last_sites.clone_from(&snap.sites);
        for r in verify_fvd_snapshot(self.space, snap, &self.cfg, self.degree_limit) {
            self.add(r);
        }
        if let Some(f) = &self.forest {
            let r = verify_sparsity_and_splits(
                self.space,
                f,
                snap,
                &self.provenance,
                &self.cfg,
                &mut self.rad_cache,
            );
            self.add(r);
        }
    }
}

impl<T: Scalar, M: Metric<T> + ?Sized> Observer<T> for Auditor<'_, T, M> {
    fn snapshot_wanted(&mut self, insertion: usize) -> bool {
        insertion % self.every == 0
    }

    fn backburner_snapshots(&self) -> bool {
        true
    }

    fn on_start(&mut self, splits: &[SplitEvent<T>], snap: Option<&Snapshot<T>>) {
        self.expect("bb.empty_annulus");
        self.expect("bb.isolation");
        self.record_splits(splits);
        if let Some(s) = snap {
            self.check(s);
        }
    }

    fn on_insertion(&mut self, rep: &InsertionReport<T>, snap: Option<&Snapshot<T>>) {
        self.record_splits(&rep.splits);
        if self.forest.is_none() && rep.splits.iter().any(|s| s.kind != SplitKind::Refine) {
            self.add(Report::fail(
                "fvd.split_radius",
                format!("split at insertion of {} without a forest", rep.site),
            ));
        }
        if let Some(s) = snap {
            self.check(s);
        }
    }

    fn on_backburner_entry(&mut self, cell: u32, _key: T, snap: Option<&Snapshot<T>>) {
        self.bb_entries += 1;
        if let Some(s) = snap {
            self.last_sites.clone_from(&s.sites);
            let r = verify_empty_annulus(self.space, s, cell, self.cfg.theta());
            self.add(r);
        }
    }

    fn on_backburner_removal(&mut self, cell: u32, degree: usize) {
        self.bb_removals += 1;
        let site = self.last_sites.get(cell as usize).copied();
        self.add(verify_isolation(cell, site, degree));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::gonzalez;
    use crate::fvd::Member;
    use crate::greedy_tree::PermEntry;
    use crate::metric::Norm;

    fn line() -> CoordSpace<f64> {
        CoordSpace::line(&[0.0, 1.0, 3.0, 7.0], Norm::L2)
    }

    fn perm(order: &[u32], s: &CoordSpace<f64>) -> Permutation<f64> {
        let mut entries = vec![PermEntry {
            point: PointId(order[0]),
            pred: None,
            eps: 0.0,
        }];
        for i in 1..order.len() {
            let p = PointId(order[i]);
            let (pred, eps) = order[..i]
                .iter()
                .map(|&q| (PointId(q), s.dist(p, PointId(q))))
                .fold(
                    (PointId(0), f64::INFINITY),
                    |b, x| if x.1 < b.1 { x } else { b },
                );
            entries.push(PermEntry {
                point: p,
                pred: Some(pred),
                eps,
            });
        }
        Permutation {
            entries,
            factor_claim: 1.0,
        }
    }

    #[test]
    fn greedy_factor_examples() {
        let s = line();
        let (g, _) = gonzalez(&s, PointId(0)).unwrap();
        assert_eq!(greedy_factor(&s, &g), 1.0);
        assert_eq!(greedy_factor(&s, &perm(&[0, 1, 2, 3], &s)), 7.0);
        let one = CoordSpace::line(&[5.0], Norm::L2);
        assert_eq!(greedy_factor(&one, &perm(&[0], &one)), 1.0);
        assert!(verify_permutation(&s, &g, 1.0).iter().all(Report::passed));
        let bad = verify_permutation(&s, &perm(&[0, 1, 2, 3], &s), 4.0);
        assert!(!bad[2].passed());
        assert!(bad[2].witness.as_ref().unwrap().contains("rank 1"));
    }

    #[test]
    fn tree_checks_and_mutants() {
        let s = line();
        let (_, t) = gonzalez(&s, PointId(0)).unwrap();
        assert!(all_passed(&verify_tree(&s, &t, TreeParams::EXACT)));
        // every pred on {0, 1, 3, 7} is the root, which has no insertion distance
        let r = verify_tree(
            &s,
            &t,
            TreeParams {
                alpha: 2.0,
                delta: 1.0,
                gamma: 1.0,
            },
        );
        assert!(r
            .iter()
            .find(|r| r.check == "tree.scaling")
            .unwrap()
            .passed());
        let s3 = CoordSpace::line(&[0.0, 10.0, 11.0], Norm::L2);
        let (_, t3) = gonzalez(&s3, PointId(0)).unwrap();
        let r = verify_tree(
            &s3,
            &t3,
            TreeParams {
                alpha: 20.0,
                delta: 1.0,
                gamma: 1.0,
            },
        );
        let sc = r.iter().find(|r| r.check == "tree.scaling").unwrap();
        assert!(!sc.passed(), "{sc}");
        assert!(sc.witness.as_ref().unwrap().contains("point 1"));
        let r = verify_tree(
            &s,
            &t,
            TreeParams {
                alpha: 1.0,
                delta: 0.5,
                gamma: 1.0,
            },
        );
        assert!(!r
            .iter()
            .find(|r| r.check == "tree.approximate")
            .unwrap()
            .passed());
        let r = verify_tree(
            &s,
            &t,
            TreeParams {
                alpha: 1.0,
                delta: 1.0,
                gamma: 0.5,
            },
        );
        assert!(!r
            .iter()
            .find(|r| r.check == "tree.greedy")
            .unwrap()
            .passed());
    }

    #[test]
    fn strong_packing_vacuous_and_mutant() {
        let s = line();
        let (_, t) = gonzalez(&s, PointId(0)).unwrap();
        assert_eq!(verify_strong_packing(&s, &t, 0.0).status, Status::Vacuous);
        assert_eq!(
            FvdConfig {
                lazy: 2.0,
                cell_approx: 1.0,
                ..FvdConfig::default()
            }
            .strong_packing(),
            1.0 / 6.0
        );
        assert!(verify_strong_packing(&s, &t, 1.0 / 36.0).passed());
        // the node {0, 1, 3} splits at 3 and point 7 lies within 3 * 3 of 0
        assert!(!verify_strong_packing(&s, &t, 3.0).passed());
    }

    #[test]
    fn packing_examples() {
        let s = line();
        let pts: Vec<PointId> = (0..4).map(PointId).collect();
        let r = packing_check(&s, &pts, 1.0, &[3.5], 3.5);
        assert!(r.packed && r.covered && r.size == 4);
        assert!(r.within(3.5, 1.0, 1));
        assert_eq!(packing_bound(3.5, 1.0, 1), 14.0);
        assert!(!packing_check(&s, &pts, 1.5, &[3.5], 3.5).packed);
        assert_eq!(degree_ceiling(&FvdConfig::EXACT, 1), 12.0);
    }

    fn snap_for(
        s: &CoordSpace<f64>,
        sites: &[u32],
        cells: &[&[u32]],
        adj: &[&[u32]],
    ) -> Snapshot<f64> {
        let sites: Vec<PointId> = sites.iter().map(|&x| PointId(x)).collect();
        let cell_points: Vec<Vec<PointId>> = cells
            .iter()
            .map(|c| c.iter().map(|&x| PointId(x)).collect())
            .collect();
        let members = cell_points
            .iter()
            .zip(&sites)
            .map(|(pts, &site)| {
                pts.iter()
                    .filter(|&&p| p != site)
                    .map(|&p| {
                        let dd = s.dist(site, p);
                        Member {
                            entry: p.0,
                            center: p,
                            dist: dd,
                            key: dd,
                        }
                    })
                    .collect()
            })
            .collect::<Vec<Vec<_>>>();
        let out_ub = members
            .iter()
            .map(|m: &Vec<Member<f64>>| m.iter().map(|x| x.key).fold(0.0, f64::max))
            .collect();
        Snapshot {
            sites,
            cell_points,
            members,
            out_ub,
            adj: adj.iter().map(|a| a.to_vec()).collect(),
            queue: None,
        }
    }

    #[test]
    fn snapshot_checks_and_mutants() {
        let s = line();
        let cfg = FvdConfig::EXACT;
        let find = |r: &[Report], c: &str| r.iter().find(|x| x.check == c).unwrap().clone();
        let single = snap_for(&s, &[0], &[&[0, 1, 2, 3]], &[&[]]);
        assert!(all_passed(&verify_fvd_snapshot(&s, &single, &cfg, None)));
        let good = snap_for(&s, &[0, 2], &[&[0, 1], &[2, 3]], &[&[1], &[0]]);
        let r = verify_fvd_snapshot(&s, &good, &cfg, None);
        assert!(all_passed(&r), "{r:?}");

        // point 3 misassigned to the cell of 0
        let mis = snap_for(&s, &[0, 2], &[&[0, 1, 3], &[2]], &[&[1], &[0]]);
        assert!(!find(&verify_fvd_snapshot(&s, &mis, &cfg, None), "fvd.cell").passed());
        // d(1, 3) = 2 < d(3, 7) = 4 requires an edge
        let no_edge = snap_for(&s, &[0, 3], &[&[0, 1], &[3, 2]], &[&[], &[]]);
        assert!(!find(
            &verify_fvd_snapshot(&s, &no_edge, &cfg, None),
            "fvd.neighbor"
        )
        .passed());
        // stored bound below the true radius
        let mut low = good.clone();
        low.out_ub[0] = 0.5;
        assert!(!find(&verify_fvd_snapshot(&s, &low, &cfg, None), "fvd.radius_ub").passed());
        // edge longer than the pruning bound
        let mut long = snap_for(&s, &[0, 3], &[&[0, 1], &[3, 2]], &[&[1], &[0]]);
        assert!(find(&verify_fvd_snapshot(&s, &long, &cfg, None), "fvd.pruning").passed());
        long.out_ub = vec![1.0, 1.0];
        assert!(!find(&verify_fvd_snapshot(&s, &long, &cfg, None), "fvd.pruning").passed());
        // far point kept in a cell whose site has a close outside neighbor
        let far = CoordSpace::line(&[0.0, 0.001, 100.0], Norm::L2);
        let ar = snap_for(&far, &[0, 1], &[&[0, 2], &[1]], &[&[1], &[0]]);
        assert!(!find(
            &verify_fvd_snapshot(&far, &ar, &cfg, None),
            "fvd.aspect_ratio"
        )
        .passed());
        // degree limit
        assert!(!find(&verify_fvd_snapshot(&s, &good, &cfg, Some(0)), "fvd.degree").passed());
        // partition
        let mut dup = good.clone();
        dup.cell_points[1].push(PointId(1));
        assert!(!find(&verify_fvd_snapshot(&s, &dup, &cfg, None), "fvd.partition").passed());
        // one-sided edge
        let mut one = good.clone();
        one.adj[1].clear();
        assert!(!find(&verify_fvd_snapshot(&s, &one, &cfg, None), "fvd.graph").passed());
    }

    #[test]
    fn heap_invariant_mutant() {
        let s = line();
        let cfg = FvdConfig::EXACT;
        let mut snap = snap_for(&s, &[0, 3], &[&[0, 1, 2], &[3]], &[&[1], &[0]]);
        snap.queue = Some(crate::fvd::QueueState {
            entries: vec![(0, 3.0, false)],
            head: Some((0, false)),
        });
        let r = verify_fvd_snapshot(&s, &snap, &cfg, None);
        assert!(r.iter().find(|x| x.check == "fvd.heap").unwrap().passed());
        let mut snap = snap_for(&s, &[0, 1], &[&[0], &[1, 2, 3]], &[&[1], &[0]]);
        snap.queue = Some(crate::fvd::QueueState {
            entries: vec![(1, 6.0, false)],
            head: Some((0, false)),
        });
        let r = verify_fvd_snapshot(&s, &snap, &cfg, None);
        assert!(!r.iter().find(|x| x.check == "fvd.heap").unwrap().passed());
    }

    #[test]
    fn annulus_and_isolation_mutants() {
        let s = CoordSpace::line(&[0.0, 1.0, 3.0, 100.0], Norm::L2);
        let ok = snap_for(&s, &[0, 3], &[&[0, 1, 2], &[3]], &[&[], &[]]);
        assert!(verify_empty_annulus(&s, &ok, 0, 5.0).passed());
        let bad = snap_for(&s, &[0, 2], &[&[0, 1], &[2, 3]], &[&[], &[]]);
        assert!(!verify_empty_annulus(&s, &bad, 0, 5.0).passed());
        assert!(verify_isolation(0, None, 0).passed());
        assert!(!verify_isolation(0, Some(PointId(4)), 2).passed());
    }

    #[test]
    fn covering_and_net_packing() {
        let s = line();
        let (_, t) = gonzalez(&s, PointId(0)).unwrap();
        assert!(verify_covering(&s, &t, 1.0).passed());
        assert!(!verify_covering(&s, &t, 0.5).passed());
        assert_eq!(verify_net_packing(&s, &t, &[1.0]).status, Status::Vacuous);
        // every pred is the root, so any scaling claim holds
        let e = CoordSpace::line(&[0.0, 1.0, 2.0, 4.0, 8.0, 16.0], Norm::L2);
        let (_, mut t) = gonzalez(&e, PointId(0)).unwrap();
        t.set_params(TreeParams {
            alpha: 2.0,
            delta: 1.0,
            gamma: 1.0,
        });
        assert!(verify_net_packing(&e, &t, &[1.0, 4.0, 16.0]).passed());
        t.set_params(TreeParams {
            alpha: 1e9,
            delta: 1e-3,
            gamma: 1.0,
        });
        assert!(!verify_net_packing(&e, &t, &[16.0]).passed());
    }

    #[test]
    fn report_display() {
        let r = Report::fail("x.y", "w".into()).with_measured(2.0);
        assert_eq!(r.to_string(), "x.y FAIL measured=2 witness: w");
        assert_eq!(Report::vacuous("a").to_string(), "a VACUOUS");
    }
}
