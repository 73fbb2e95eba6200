//! Server occupancies with the incrementally maintained sets the
//! assignment rules consult.

use rand::Rng;

use crate::scheme::Threshold;

const ABSENT: usize = usize::MAX;

/// A subset of `0..capacity` with O(1) insert, remove and uniform pick.
#[derive(Debug, Clone)]
pub struct IndexedSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl IndexedSet {
    pub fn new(capacity: usize) -> Self {
        IndexedSet {
            items: Vec::new(),
            pos: vec![ABSENT; capacity],
        }
    }

    pub fn full(capacity: usize) -> Self {
        IndexedSet {
            items: (0..capacity).collect(),
            pos: (0..capacity).collect(),
        }
    }

    pub fn contains(&self, x: usize) -> bool {
        self.pos[x] != ABSENT
    }

    pub fn insert(&mut self, x: usize) {
        if self.pos[x] == ABSENT {
            self.pos[x] = self.items.len();
            self.items.push(x);
        }
    }

    pub fn remove(&mut self, x: usize) {
        let at = self.pos[x];
        if at == ABSENT {
            return;
        }
        let last = self.items.pop().expect("non-empty");
        if last != x {
            self.items[at] = last;
            self.pos[last] = at;
        }
        self.pos[x] = ABSENT;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.items.is_empty() {
            None
        } else {
            Some(self.items[rng.gen_range(0..self.items.len())])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.items.iter()
    }
}

/// Time-weighted occupancy statistics over `[start, ∞)`.
#[derive(Debug, Clone)]
struct LevelClock {
    start: f64,
    /// Server-seconds spent at each level.
    area: Vec<f64>,
    last: Vec<f64>,
}

impl LevelClock {
    fn new(start: f64) -> Self {
        LevelClock {
            start,
            area: Vec::new(),
            last: Vec::new(),
        }
    }

    fn grow(&mut self, level: usize) {
        if level >= self.area.len() {
            self.area.resize(level + 1, 0.0);
            self.last.resize(level + 1, self.start);
        }
    }

    /// Accrues `count` servers at `level` up to time `t`.
    fn accrue(&mut self, level: usize, count: usize, t: f64) {
        self.grow(level);
        if t > self.last[level] {
            self.area[level] += count as f64 * (t - self.last[level]);
            self.last[level] = t;
        }
    }
}

/// Occupancies of `n` servers plus invite (`occ < l`), accepting
/// (`occ < h`) and per-level sets.
#[derive(Debug, Clone)]
pub struct ServerPool {
    occ: Vec<u32>,
    l: u32,
    h: Threshold,
    invite: IndexedSet,
    accepting: IndexedSet,
    levels: Vec<IndexedSet>,
    min_level: usize,
    clock: LevelClock,
}

impl ServerPool {
    /// `n` idle servers; statistics accrue from `stats_start`.
    pub fn new(n: usize, l: u32, h: Threshold, stats_start: f64) -> Self {
        let levels = vec![IndexedSet::full(n)];
        ServerPool {
            occ: vec![0; n],
            l,
            h,
            invite: if l > 0 {
                IndexedSet::full(n)
            } else {
                IndexedSet::new(n)
            },
            accepting: if h == Threshold::Finite(0) {
                IndexedSet::new(n)
            } else {
                IndexedSet::full(n)
            },
            levels,
            min_level: 0,
            clock: LevelClock::new(stats_start),
        }
    }

    pub fn n(&self) -> usize {
        self.occ.len()
    }

    pub fn occupancy(&self, server: usize) -> u32 {
        self.occ[server]
    }

    pub fn occupancies(&self) -> &[u32] {
        &self.occ
    }

    pub fn total(&self) -> u64 {
        self.occ.iter().map(|&o| o as u64).sum()
    }

    /// Servers holding an invite (fewer than `l` flows).
    pub fn invite(&self) -> &IndexedSet {
        &self.invite
    }

    /// Servers not disinvited (fewer than `h` flows).
    pub fn accepting(&self) -> &IndexedSet {
        &self.accepting
    }

    pub fn min_level(&self) -> u32 {
        self.min_level as u32
    }

    /// Servers at the minimum occupancy.
    pub fn least_loaded(&self) -> &IndexedSet {
        &self.levels[self.min_level]
    }

    fn level_set(&mut self, level: usize) -> &mut IndexedSet {
        while self.levels.len() <= level {
            self.levels.push(IndexedSet::new(self.occ.len()));
        }
        &mut self.levels[level]
    }

    fn set_occupancy(&mut self, server: usize, new: u32, t: f64) {
        let old = self.occ[server] as usize;
        let new_u = new as usize;
        let n_old = self.levels[old].len();
        self.clock.accrue(old, n_old, t);
        let n_new = self.levels.get(new_u).map_or(0, |s| s.len());
        self.clock.accrue(new_u, n_new, t);

        self.levels[old].remove(server);
        self.level_set(new_u).insert(server);
        self.occ[server] = new;

        if new < self.l {
            self.invite.insert(server);
        } else {
            self.invite.remove(server);
        }
        if self.h.reached_by(new) {
            self.accepting.remove(server);
        } else {
            self.accepting.insert(server);
        }
        if new_u < self.min_level {
            self.min_level = new_u;
        } else {
            while self.levels[self.min_level].is_empty() {
                self.min_level += 1;
            }
        }
    }

    pub fn add(&mut self, server: usize, count: u32, t: f64) {
        let new = self.occ[server] + count;
        self.set_occupancy(server, new, t);
    }

    pub fn remove(&mut self, server: usize, count: u32, t: f64) {
        let new = self.occ[server]
            .checked_sub(count)
            .expect("occupancy would become negative");
        self.set_occupancy(server, new, t);
    }

    /// Time-weighted fraction of servers at each level over `[start, t]`.
    pub fn histogram(&mut self, t: f64) -> Vec<f64> {
        for level in 0..self.levels.len() {
            let count = self.levels[level].len();
            self.clock.accrue(level, count, t);
        }
        let norm = self.n() as f64 * (t - self.clock.start);
        let mut hist: Vec<f64> = self.clock.area.iter().map(|a| a / norm).collect();
        while hist.len() > 1 && *hist.last().unwrap() == 0.0 {
            hist.pop();
        }
        hist
    }
}
