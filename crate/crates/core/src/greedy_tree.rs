//! Hereditary ball trees built alongside the Voronoi diagram, their
//! heap-ordered traversal and the text formats for trees and permutations.

use rustc_hash::FxHashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::metric::{Metric, PointId};
use crate::queues::ExactMaxHeap;
use crate::scalar::Scalar;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TreeNode<T> {
    pub center: PointId,
    /// Arena index of the left child, zero on leaves; the right child follows it.
    left: u32,
    /// Distance between the children's centers; zero on leaves.
    pub split_dist: T,
    /// Upper bound on the distance from `center` to any point below.
    pub rad_ub: T,
}

impl<T: Scalar> TreeNode<T> {
    fn leaf(center: PointId) -> Self {
        TreeNode {
            center,
            left: 0,
            split_dist: T::zero(),
            rad_ub: T::zero(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left == 0
    }

    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        (self.left != 0).then(|| (NodeId(self.left), NodeId(self.left + 1)))
    }
}

/// Claimed `(alpha, delta, gamma)` constants of a greedy tree.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TreeParams {
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl TreeParams {
    pub const EXACT: TreeParams = TreeParams {
        alpha: 1.0,
        delta: 1.0,
        gamma: 1.0,
    };
}

/// Predecessor record of one point, in attach order.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PointRecord<T> {
    pub point: PointId,
    pub pred: Option<PointId>,
    pub eps: T,
}

/// A hereditary binary ball tree over a subset of a metric space.
#[derive(Clone, Debug)]
pub struct GreedyTree<T> {
    nodes: Vec<TreeNode<T>>,
    records: Vec<PointRecord<T>>,
    index: FxHashMap<PointId, (NodeId, u32)>,
    params: TreeParams,
    finished: bool,
}

impl<T: Scalar> GreedyTree<T> {
    /// A single-leaf tree on `root`.
    pub fn leaf(root: PointId, params: TreeParams) -> Self {
        let mut index = FxHashMap::default();
        index.insert(root, (NodeId(0), 0));
        GreedyTree {
            nodes: vec![TreeNode::leaf(root)],
            records: vec![PointRecord {
                point: root,
                pred: None,
                eps: T::zero(),
            }],
            index,
            params,
            finished: true,
        }
    }

    pub fn with_capacity(root: PointId, params: TreeParams, n: usize) -> Self {
        let mut t = Self::leaf(root, params);
        t.nodes.reserve(2 * n);
        t.records.reserve(n);
        t.index.reserve(n);
        t
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn root_point(&self) -> PointId {
        self.nodes[0].center
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn set_params(&mut self, params: TreeParams) {
        self.params = params;
    }

    /// Number of points (leaves).
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &TreeNode<T> {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    /// Points in attach order, the root first.
    pub fn records(&self) -> &[PointRecord<T>] {
        &self.records
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.index.contains_key(&p)
    }

    pub fn leaf_of(&self, p: PointId) -> Option<NodeId> {
        self.index.get(&p).map(|&(n, _)| n)
    }

    pub fn record(&self, p: PointId) -> Option<&PointRecord<T>> {
        self.index.get(&p).map(|&(_, r)| &self.records[r as usize])
    }

    pub fn pred(&self, p: PointId) -> Option<PointId> {
        self.record(p).and_then(|r| r.pred)
    }

    pub fn eps(&self, p: PointId) -> Option<T> {
        self.record(p).filter(|r| r.pred.is_some()).map(|r| r.eps)
    }

    /// Attaches `q` below the leaf of `p` at insertion distance `eps`.
    pub fn attach(&mut self, p: PointId, q: PointId, eps: T) -> Result<()> {
        let leaf = self
            .leaf_of(p)
            .ok_or_else(|| Error::Contract(format!("attach: {p} is not in the tree")))?;
        self.attach_at(leaf, q, eps)
    }

    /// Attaches `q` below the given leaf node.
    pub fn attach_at(&mut self, leaf: NodeId, q: PointId, eps: T) -> Result<()> {
        let node = *self
            .nodes
            .get(leaf.index())
            .ok_or_else(|| Error::Contract(format!("attach: no node {}", leaf.0)))?;
        if !node.is_leaf() {
            return Err(Error::Contract(format!(
                "attach: node {} is not a leaf",
                leaf.0
            )));
        }
        if self.index.contains_key(&q) {
            return Err(Error::Contract(format!(
                "attach: {q} is already in the tree"
            )));
        }
        let p = node.center;
        let l = NodeId(self.nodes.len() as u32);
        let r = NodeId(l.0 + 1);
        self.nodes.push(TreeNode::leaf(p));
        self.nodes.push(TreeNode::leaf(q));
        let x = &mut self.nodes[leaf.index()];
        x.left = l.0;
        x.split_dist = eps;
        x.rad_ub = eps;
        self.index.get_mut(&p).expect("center indexed").0 = l;
        self.index.insert(q, (r, self.records.len() as u32));
        self.records.push(PointRecord {
            point: q,
            pred: Some(p),
            eps,
        });
        self.finished = false;
        Ok(())
    }

    /// Recomputes every stored radius bound bottom-up with
    /// `rad(x) = max(rad(left), split_dist(x) + rad(right))`.
    pub fn finish(&mut self) {
        if self.finished {
            return;
        }
        // children always sit at larger arena indices than their parent
        for i in (0..self.nodes.len()).rev() {
            if let Some((l, r)) = self.nodes[i].children() {
                let rl = self.nodes[l.index()].rad_ub;
                let rr = self.nodes[r.index()].rad_ub;
                let x = &mut self.nodes[i];
                x.rad_ub = rl.max(x.split_dist + rr);
            }
        }
        self.finished = true;
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// The two children of an internal node.
    pub fn split(&self, node: NodeId) -> Result<(NodeId, NodeId)> {
        self.node(node)
            .children()
            .ok_or_else(|| Error::Contract(format!("split: node {} is a leaf", node.0)))
    }

    /// Closed-form radius bound `min(eps_a/(alpha-1), alpha*gamma*eps_b/(alpha-1))`
    /// where `a` is the node's center and `b` its right child's center.
    pub fn radius_ub(&self, node: NodeId) -> Result<T> {
        let x = self.node(node);
        let Some((_, r)) = x.children() else {
            return Ok(T::zero());
        };
        let alpha = self.params.alpha;
        if alpha <= 1.0 {
            return Err(Error::BoundUnavailable(alpha));
        }
        let eps_b = self.node(r).center;
        let eps_b = self
            .eps(eps_b)
            .expect("right child has a predecessor")
            .as_f64();
        let mut bound = alpha * self.params.gamma * eps_b / (alpha - 1.0);
        if let Some(eps_a) = self.eps(x.center) {
            bound = bound.min(eps_a.as_f64() / (alpha - 1.0));
        }
        Ok(T::of(bound))
    }

    /// Points below `node`, left subtree first.
    pub fn points_under(&self, node: NodeId) -> Vec<PointId> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            let n = self.node(x);
            match n.children() {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(n.center),
            }
        }
        out
    }

    /// Exact radius of `node` by scanning its subtree.
    pub fn exact_radius<M: Metric<T> + ?Sized>(&self, node: NodeId, space: &M) -> T {
        let c = self.node(node).center;
        self.points_under(node)
            .into_iter()
            .map(|q| if q == c { T::zero() } else { space.dist(c, q) })
            .fold(T::zero(), T::max)
    }

    /// Parent of every node; `None` for the root.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut par = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some((l, r)) = n.children() {
                par[l.index()] = Some(NodeId(i as u32));
                par[r.index()] = Some(NodeId(i as u32));
            }
        }
        par
    }

    /// Heap-ordered traversal: pop the internal node with the largest split
    /// distance, emit its right child's center, push its internal children.
    pub fn heap_order_traversal(&self) -> Permutation<T> {
        let mut entries = Vec::with_capacity(self.len());
        entries.push(PermEntry {
            point: self.root_point(),
            pred: None,
            eps: T::zero(),
        });
        let mut heap: ExactMaxHeap<(T, std::cmp::Reverse<PointId>)> = ExactMaxHeap::new();
        let push = |heap: &mut ExactMaxHeap<_>, id: NodeId| {
            let n = self.node(id);
            if let Some((_, r)) = n.children() {
                heap.set(
                    id.index(),
                    (n.split_dist, std::cmp::Reverse(self.node(r).center)),
                );
            }
        };
        push(&mut heap, self.root());
        while let Some((id, (eps, _))) = heap.pop_max() {
            let (l, r) = self.node(NodeId(id as u32)).children().expect("internal");
            let q = self.node(r).center;
            entries.push(PermEntry {
                point: q,
                pred: self.pred(q),
                eps,
            });
            push(&mut heap, l);
            push(&mut heap, r);
        }
        Permutation {
            entries,
            factor_claim: self.params.gamma,
        }
    }

    /// Copy with every point id increased by `offset`, finished.
    pub fn shifted(&self, offset: u32) -> Result<Self> {
        let trav = self.heap_order_traversal();
        let mut out = GreedyTree::with_capacity(
            PointId(self.root_point().0 + offset),
            self.params,
            self.len(),
        );
        for e in &trav.entries[1..] {
            let p = e.pred.expect("non-root");
            out.attach(PointId(p.0 + offset), PointId(e.point.0 + offset), e.eps)?;
        }
        out.finish();
        Ok(out)
    }

    /// Structural equality: same root, same predecessor chains in the same order.
    pub fn same_structure(&self, other: &GreedyTree<T>) -> bool {
        fn walk<T: Scalar>(a: &GreedyTree<T>, x: NodeId, b: &GreedyTree<T>, y: NodeId) -> bool {
            let mut stack = vec![(x, y)];
            while let Some((x, y)) = stack.pop() {
                let nx = a.node(x);
                let ny = b.node(y);
                if nx.center != ny.center || nx.split_dist != ny.split_dist {
                    return false;
                }
                match (nx.children(), ny.children()) {
                    (None, None) => {}
                    (Some((lx, rx)), Some((ly, ry))) => {
                        stack.push((lx, ly));
                        stack.push((rx, ry));
                    }
                    _ => return false,
                }
            }
            true
        }
        self.len() == other.len() && walk(self, self.root(), other, other.root())
    }

    /// Writes the tree in `greedytree v1` format.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.params;
        writeln!(
            w,
            "greedytree v1 n={} alpha={} delta={} gamma={} root={}",
            self.len(),
            p.alpha,
            p.delta,
            p.gamma,
            self.root_point()
        )?;
        let trav = self.heap_order_traversal();
        for e in &trav.entries[1..] {
            writeln!(w, "{} {} {}", e.point, e.pred.expect("non-root"), e.eps)?;
        }
        Ok(())
    }

    /// Reads a `greedytree v1` file by replaying its attaches.
    ///
    /// With a space, the tree may not hold more points than the space and every
    /// id must be valid.
    pub fn read<R: BufRead, M: Metric<T> + ?Sized>(reader: R, space: Option<&M>) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => {
                    return Err(Error::Format {
                        what: "tree header",
                        msg: "empty file".into(),
                    })
                }
            }
        };
        let fields = parse_header(
            &header,
            "greedytree",
            &["n", "alpha", "delta", "gamma", "root"],
        )?;
        let n: usize = parse_field(&fields[0], "tree header")?;
        let params = TreeParams {
            alpha: parse_field(&fields[1], "tree header")?,
            delta: parse_field(&fields[2], "tree header")?,
            gamma: parse_field(&fields[3], "tree header")?,
        };
        let root: u32 = parse_field(&fields[4], "tree header")?;
        if let Some(s) = space {
            if n > s.len() {
                return Err(Error::Mismatch(format!(
                    "tree has {n} points, space has {}",
                    s.len()
                )));
            }
            if root as usize >= s.len() {
                return Err(Error::InvalidPoint {
                    index: root as usize,
                    n: s.len(),
                });
            }
        }
        let mut tree = GreedyTree::with_capacity(PointId(root), params, n);
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut it = t.split_whitespace();
            let (Some(q), Some(p), Some(e), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected `<point> <pred> <eps>`".into(),
                });
            };
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                msg: m.to_string(),
            };
            let q: u32 = q.parse().map_err(|_| bad("bad point id"))?;
            let p: u32 = p.parse().map_err(|_| bad("bad predecessor id"))?;
            let e: T = e.parse().map_err(|_| bad("bad insertion distance"))?;
            if let Some(s) = space {
                if q as usize >= s.len() {
                    return Err(Error::InvalidPoint {
                        index: q as usize,
                        n: s.len(),
                    });
                }
            }
            if !tree.contains(PointId(p)) {
                return Err(bad(&format!("predecessor {p} of {q} is not attached yet")));
            }
            tree.attach(PointId(p), PointId(q), e)
                .map_err(|err| bad(&err.to_string()))?;
        }
        if tree.len() != n {
            return Err(Error::Mismatch(format!(
                "header says n={n}, body has {} points",
                tree.len()
            )));
        }
        tree.finish();
        Ok(tree)
    }
}

/// One rank of a permutation. The first entry has no predecessor.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PermEntry<T> {
    pub point: PointId,
    pub pred: Option<PointId>,
    pub eps: T,
}

/// A point ordering with predecessors and insertion distances.
#[derive(Clone, Debug, PartialEq)]
pub struct Permutation<T> {
    pub entries: Vec<PermEntry<T>>,
    /// Greedy factor guaranteed by the producing algorithm.
    pub factor_claim: f64,
}

impl<T: Scalar> Permutation<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self) -> Vec<PointId> {
        self.entries.iter().map(|e| e.point).collect()
    }

    pub fn start(&self) -> PointId {
        self.entries[0].point
    }

    /// Checks that every point of `0..n` appears once and predecessors precede.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.entries.len() != n {
            return Err(Error::Mismatch(format!(
                "permutation has {} points, space has {n}",
                self.len()
            )));
        }
        let mut seen = vec![false; n];
        for (rank, e) in self.entries.iter().enumerate() {
            let i = e.point.index();
            if i >= n {
                return Err(Error::InvalidPoint { index: i, n });
            }
            if seen[i] {
                return Err(Error::Mismatch(format!("point {i} appears twice")));
            }
            match e.pred {
                None if rank == 0 => {}
                None => return Err(Error::Mismatch(format!("rank {rank} has no predecessor"))),
                Some(p) if p.index() < n && seen[p.index()] => {}
                Some(p) => {
                    return Err(Error::Mismatch(format!(
                        "predecessor {p} of {i} does not precede it"
                    )))
                }
            }
            seen[i] = true;
        }
        Ok(())
    }

    /// Writes the `greedyperm v1` format.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "greedyperm v1 n={} start={} factor_claim={}",
            self.len(),
            self.start(),
            self.factor_claim
        )?;
        for (rank, e) in self.entries.iter().enumerate() {
            match e.pred {
                None => writeln!(w, "{rank} {} - -", e.point)?,
                Some(p) => writeln!(w, "{rank} {} {p} {}", e.point, e.eps)?,
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("utf8")
    }

    /// Reads the `greedyperm v1` format. Trailing `key=value` lines are ignored.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => {
                return Err(Error::Format {
                    what: "permutation header",
                    msg: "empty file".into(),
                })
            }
        };
        let fields = parse_header(&header, "greedyperm", &["n", "start", "factor_claim"])?;
        let n: usize = parse_field(&fields[0], "permutation header")?;
        let factor_claim: f64 = parse_field(&fields[2], "permutation header")?;
        let mut entries = Vec::with_capacity(n);
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.contains('=') {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                msg: m.to_string(),
            };
            let f: Vec<&str> = t.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("expected `<rank> <point> <pred> <eps>`"));
            }
            let rank: usize = f[0].parse().map_err(|_| bad("bad rank"))?;
            if rank != entries.len() {
                return Err(bad("ranks out of sequence"));
            }
            let point = PointId(f[1].parse().map_err(|_| bad("bad point id"))?);
            let entry = if f[2] == "-" {
                PermEntry {
                    point,
                    pred: None,
                    eps: T::zero(),
                }
            } else {
                PermEntry {
                    point,
                    pred: Some(PointId(f[2].parse().map_err(|_| bad("bad predecessor"))?)),
                    eps: f[3].parse().map_err(|_| bad("bad insertion distance"))?,
                }
            };
            entries.push(entry);
        }
        if entries.len() != n {
            return Err(Error::Mismatch(format!(
                "header says n={n}, body has {} ranks",
                entries.len()
            )));
        }
        Ok(Permutation {
            entries,
            factor_claim,
        })
    }
}

impl<T: Scalar> fmt::Display for Permutation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_header(line: &str, magic: &'static str, keys: &[&str]) -> Result<Vec<String>> {
    let what = "header";
    let mut it = line.split_whitespace();
    if it.next() != Some(magic) || it.next() != Some("v1") {
        return Err(Error::Format {
            what,
            msg: format!("expected `{magic} v1 ...`, got `{line}`"),
        });
    }
    let kv: Vec<&str> = it.collect();
    if kv.len() != keys.len() {
        return Err(Error::Format {
            what,
            msg: format!("expected fields {keys:?}"),
        });
    }
    kv.iter()
        .zip(keys)
        .map(|(f, k)| match f.split_once('=') {
            Some((a, b)) if a == *k => Ok(b.to_string()),
            _ => Err(Error::Format {
                what,
                msg: format!("expected `{k}=...`, got `{f}`"),
            }),
        })
        .collect()
}

fn parse_field<V: std::str::FromStr>(s: &str, what: &'static str) -> Result<V> {
    s.parse().map_err(|_| Error::Format {
        what,
        msg: format!("bad value `{s}`"),
    })
}
