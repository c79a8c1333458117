//! Priority structures that order site insertions.
//!
//! [`ExactMaxHeap`] is an indexed binary heap with key updates. [`BucketQueue`]
//! rounds keys down to powers of a base, keeps a bounded window of buckets
//! below the current top exponent and parks everything smaller on a
//! backburner list that is only served once the window is empty.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

/// Indexed max-heap over handles `0..`. Larger keys come first; equal keys
/// are ordered by the smaller handle.
#[derive(Clone, Debug)]
pub struct ExactMaxHeap<K> {
    heap: Vec<(usize, K)>,
    pos: Vec<usize>,
}

impl<K: PartialOrd + Copy> Default for ExactMaxHeap<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: PartialOrd + Copy> ExactMaxHeap<K> {
    pub fn new() -> Self {
        ExactMaxHeap {
            heap: Vec::new(),
            pos: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        ExactMaxHeap {
            heap: Vec::with_capacity(n),
            pos: vec![NONE; n],
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.pos.get(id).is_some_and(|&p| p != NONE)
    }

    pub fn key(&self, id: usize) -> Option<K> {
        match self.pos.get(id) {
            Some(&p) if p != NONE => Some(self.heap[p].1),
            _ => None,
        }
    }

    pub fn peek(&self) -> Option<(usize, K)> {
        self.heap.first().copied()
    }

    /// Inserts `id` or changes its key.
    pub fn set(&mut self, id: usize, key: K) {
        if id >= self.pos.len() {
            self.pos.resize(id + 1, NONE);
        }
        let p = self.pos[id];
        if p == NONE {
            self.heap.push((id, key));
            let i = self.heap.len() - 1;
            self.pos[id] = i;
            self.sift_up(i);
        } else {
            self.heap[p].1 = key;
            let i = self.sift_up(p);
            self.sift_down(i);
        }
    }

    pub fn remove(&mut self, id: usize) -> Option<K> {
        let p = *self.pos.get(id)?;
        if p == NONE {
            return None;
        }
        Some(self.remove_at(p).1)
    }

    pub fn pop_max(&mut self) -> Option<(usize, K)> {
        if self.heap.is_empty() {
            None
        } else {
            Some(self.remove_at(0))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, K)> + '_ {
        self.heap.iter().copied()
    }

    fn remove_at(&mut self, p: usize) -> (usize, K) {
        let last = self.heap.len() - 1;
        self.swap(p, last);
        let out = self.heap.pop().expect("nonempty");
        self.pos[out.0] = NONE;
        if p < self.heap.len() {
            let i = self.sift_up(p);
            self.sift_down(i);
        }
        out
    }

    #[inline]
    fn above(&self, a: usize, b: usize) -> bool {
        let (ia, ka) = self.heap[a];
        let (ib, kb) = self.heap[b];
        ka > kb || (!(ka < kb) && ia < ib)
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a].0] = a;
        self.pos[self.heap[b].0] = b;
    }

    fn sift_up(&mut self, mut i: usize) -> usize {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.above(i, parent) {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
        i
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let c = if r < self.heap.len() && self.above(r, l) {
                r
            } else {
                l
            };
            if self.above(c, i) {
                self.swap(c, i);
                i = c;
            } else {
                break;
            }
        }
    }
}

/// Service order of the backburner list.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum BackburnerOrder {
    #[default]
    Fifo,
    Lifo,
}

/// Where an inserted entry landed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Placement {
    Bucket(i32),
    Backburner,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Removed<T> {
    pub handle: usize,
    pub key: T,
    pub from_backburner: bool,
}

/// Operation counters used to check the amortized-constant claim.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub inserts: u64,
    pub removals: u64,
    pub bucket_scans: u64,
    pub window_shifts: u64,
    pub backburner_inserts: u64,
    pub demotions: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Loc {
    Absent,
    Bucket(i32),
    Backburner,
}

#[derive(Copy, Clone, Debug)]
struct Slot<T> {
    handle: usize,
    version: u32,
    key: T,
}

/// Base-`β` bucket queue over handles `0..` with a window of `s` buckets
/// and a backburner.
///
/// The window covers exponents `(max_exponent - s, max_exponent]` where
/// `max_exponent` tracks the largest live entry: it moves up on insert and
/// moves down once the buckets above hold nothing live. Entries falling
/// below the window go to the backburner, which is served only when the
/// window is empty. Re-inserting a queued handle replaces its old entry.
#[derive(Clone, Debug)]
pub struct BucketQueue<T> {
    base: T,
    ln_base: T,
    window: usize,
    buckets: Vec<VecDeque<Slot<T>>>,
    live: Vec<usize>,
    live_in_buckets: usize,
    backburner: VecDeque<Slot<T>>,
    live_in_backburner: usize,
    order: BackburnerOrder,
    max_exponent: Option<i32>,
    loc: Vec<Loc>,
    version: Vec<u32>,
    keys: Vec<T>,
    demoted: Vec<usize>,
    stats: QueueStats,
}

impl<T: Scalar> BucketQueue<T> {
    pub fn new(base: T, window: usize) -> Result<Self> {
        if !(base > T::one()) || !base.is_finite() {
            return Err(Error::Contract(format!(
                "bucket base must exceed 1, got {base}"
            )));
        }
        if window == 0 {
            return Err(Error::Contract("bucket window must be positive".into()));
        }
        Ok(BucketQueue {
            base,
            ln_base: base.ln(),
            window,
            buckets: (0..window).map(|_| VecDeque::new()).collect(),
            live: vec![0; window],
            live_in_buckets: 0,
            backburner: VecDeque::new(),
            live_in_backburner: 0,
            order: BackburnerOrder::Fifo,
            max_exponent: None,
            loc: Vec::new(),
            version: Vec::new(),
            keys: Vec::new(),
            demoted: Vec::new(),
            stats: QueueStats::default(),
        })
    }

    pub fn with_backburner_order(mut self, order: BackburnerOrder) -> Self {
        self.order = order;
        self
    }

    pub fn base(&self) -> T {
        self.base
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn max_exponent(&self) -> Option<i32> {
        self.max_exponent
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.live_in_buckets + self.live_in_backburner
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn backburner_len(&self) -> usize {
        self.live_in_backburner
    }

    pub fn contains(&self, h: usize) -> bool {
        self.loc.get(h).is_some_and(|&l| l != Loc::Absent)
    }

    pub fn on_backburner(&self, h: usize) -> bool {
        self.loc.get(h) == Some(&Loc::Backburner)
    }

    pub fn key(&self, h: usize) -> Option<T> {
        if self.contains(h) {
            Some(self.keys[h])
        } else {
            None
        }
    }

    pub fn bucket_len(&self, exponent: i32) -> usize {
        match self.max_exponent {
            Some(m) if exponent <= m && exponent > m - self.window as i32 => {
                self.live[self.slot(exponent)]
            }
            _ => 0,
        }
    }

    /// `floor(log_base(key))`, exact at bucket boundaries.
    pub fn exponent(&self, key: T) -> i32 {
        let guess = (key.ln() / self.ln_base).floor();
        let mut e = guess.to_i32().unwrap_or(0);
        while self.base.powi(e + 1) <= key {
            e += 1;
        }
        while self.base.powi(e) > key {
            e -= 1;
        }
        e
    }

    #[inline]
    fn slot(&self, e: i32) -> usize {
        e.rem_euclid(self.window as i32) as usize
    }

    fn kill(&mut self, h: usize) {
        match self.loc[h] {
            Loc::Absent => {}
            Loc::Bucket(e) => {
                let s = self.slot(e);
                self.live[s] -= 1;
                self.live_in_buckets -= 1;
            }
            Loc::Backburner => self.live_in_backburner -= 1,
        }
        self.loc[h] = Loc::Absent;
        self.version[h] = self.version[h].wrapping_add(1);
    }

    /// Lowers the top exponent past buckets without live entries.
    fn settle(&mut self) {
        while let Some(m) = self.max_exponent {
            if self.live_in_buckets == 0 {
                for b in self.buckets.iter_mut() {
                    b.clear();
                }
                self.max_exponent = None;
                self.stats.window_shifts += 1;
                return;
            }
            self.stats.bucket_scans += 1;
            let s = self.slot(m);
            if self.live[s] > 0 {
                return;
            }
            self.buckets[s].clear();
            self.max_exponent = Some(m - 1);
            self.stats.window_shifts += 1;
        }
    }

    /// Queues `h` with `key`, replacing any entry `h` already has.
    pub fn insert(&mut self, h: usize, key: T) -> Result<Placement> {
        if !(key > T::zero()) || !key.is_finite() {
            return Err(Error::Contract(format!(
                "bucket key must be positive and finite, got {key}"
            )));
        }
        if h >= self.loc.len() {
            self.loc.resize(h + 1, Loc::Absent);
            self.version.resize(h + 1, 0);
            self.keys.resize(h + 1, T::zero());
        }
        self.kill(h);
        self.settle();
        self.stats.inserts += 1;
        let e = self.exponent(key);
        let s = self.window as i32;
        match self.max_exponent {
            None => {
                self.max_exponent = Some(e);
                self.stats.window_shifts += 1;
            }
            Some(m) if e > m => {
                // exponents leaving the bottom of the window
                for x in (m - s + 1)..=m.min(e - s) {
                    let slot = self.slot(x);
                    let drained: Vec<_> = self.buckets[slot].drain(..).collect();
                    for it in drained {
                        if self.version[it.handle] == it.version
                            && self.loc[it.handle] == Loc::Bucket(x)
                        {
                            self.loc[it.handle] = Loc::Backburner;
                            self.live_in_backburner += 1;
                            self.backburner.push_back(it);
                            self.demoted.push(it.handle);
                            self.stats.demotions += 1;
                        }
                    }
                    self.live_in_buckets -= self.live[slot];
                    self.live[slot] = 0;
                }
                self.max_exponent = Some(e);
                self.stats.window_shifts += 1;
            }
            Some(_) => {}
        }
        let m = self.max_exponent.expect("window set");
        let item = Slot {
            handle: h,
            version: self.version[h],
            key,
        };
        self.keys[h] = key;
        if e <= m - s {
            self.backburner.push_back(item);
            self.loc[h] = Loc::Backburner;
            self.live_in_backburner += 1;
            self.stats.backburner_inserts += 1;
            Ok(Placement::Backburner)
        } else {
            let slot = self.slot(e);
            self.buckets[slot].push_back(item);
            self.live[slot] += 1;
            self.live_in_buckets += 1;
            self.loc[h] = Loc::Bucket(e);
            Ok(Placement::Bucket(e))
        }
    }

    /// Handles moved from the window to the backburner since the last call.
    pub fn take_demoted(&mut self) -> Vec<usize> {
        std::mem::take(&mut self.demoted)
    }

    /// Drops the entry of `h`, if any.
    pub fn remove(&mut self, h: usize) {
        if h < self.loc.len() {
            self.kill(h);
        }
    }

    #[inline]
    fn is_live(&self, it: &Slot<T>) -> bool {
        self.version[it.handle] == it.version && self.loc[it.handle] != Loc::Absent
    }

    /// The entry `remove_max` would return, without removing it.
    pub fn peek_max(&self) -> Option<Removed<T>> {
        if let Some(m) = self.max_exponent {
            if self.live_in_buckets > 0 {
                for k in 0..self.window as i32 {
                    let b = &self.buckets[self.slot(m - k)];
                    if let Some(it) = b.iter().find(|it| self.is_live(it)) {
                        return Some(Removed {
                            handle: it.handle,
                            key: it.key,
                            from_backburner: false,
                        });
                    }
                }
            }
        }
        let found = match self.order {
            BackburnerOrder::Fifo => self.backburner.iter().find(|it| self.is_live(it)),
            BackburnerOrder::Lifo => self.backburner.iter().rev().find(|it| self.is_live(it)),
        };
        found.map(|it| Removed {
            handle: it.handle,
            key: it.key,
            from_backburner: true,
        })
    }

    /// Oldest live entry of the highest live bucket, else a backburner entry.
    pub fn remove_max(&mut self) -> Option<Removed<T>> {
        self.settle();
        if let Some(m) = self.max_exponent {
            let slot = self.slot(m);
            while let Some(it) = self.buckets[slot].pop_front() {
                if self.is_live(&it) {
                    self.kill(it.handle);
                    self.stats.removals += 1;
                    return Some(Removed {
                        handle: it.handle,
                        key: it.key,
                        from_backburner: false,
                    });
                }
            }
            unreachable!("settled top bucket holds a live entry");
        }
        loop {
            let it = match self.order {
                BackburnerOrder::Fifo => self.backburner.pop_front(),
                BackburnerOrder::Lifo => self.backburner.pop_back(),
            }?;
            if self.is_live(&it) {
                self.kill(it.handle);
                self.stats.removals += 1;
                return Some(Removed {
                    handle: it.handle,
                    key: it.key,
                    from_backburner: true,
                });
            }
        }
    }

    /// Live entries as `(handle, key, on_backburner)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, T, bool)> + '_ {
        self.loc
            .iter()
            .enumerate()
            .filter_map(move |(h, l)| match l {
                Loc::Absent => None,
                Loc::Bucket(_) => Some((h, self.keys[h], false)),
                Loc::Backburner => Some((h, self.keys[h], true)),
            })
    }
}

/// Heap Invariant check on exact cell data: every queued cell's out-radius
/// is at most `gamma` times the head's distance to its farthest point.
pub fn heap_invariant_holds<T: Scalar>(radii: &[T], head_farthest: T, gamma: T) -> bool {
    let bound = gamma * head_farthest;
    radii
        .iter()
        .all(|&r| crate::scalar::le_slack(r, bound, 1e-9))
}
