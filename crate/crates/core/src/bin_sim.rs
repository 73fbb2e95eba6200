//! Bin-based load balancing: flows hash statically into `m` bins and whole
//! bins are re-allocated between servers with the pull-based rule.

use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow_sim::{
    exponential, Departure, ReallocPolicy, ServerPool, SimConfig, SimStats, Tracker,
};
use crate::scheme::{SchemeConfig, Threshold};

/// splitmix64 finalizer of the flow id, reduced mod `m`.
pub fn hash_flow_to_bin(flow_id: u64, m: usize) -> usize {
    let mut z = flow_id.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z % m as u64) as usize
}

#[derive(Debug, Clone, Copy)]
struct FlowEntry {
    bin: usize,
    pos: usize,
    violated: bool,
}

/// Bin → server map with per-server bin lists and per-bin flow lists.
#[derive(Debug, Clone)]
pub struct BinTable {
    owner: Vec<usize>,
    bin_pos: Vec<usize>,
    server_bins: Vec<Vec<usize>>,
    bin_flows: Vec<Vec<usize>>,
    flows: Vec<FlowEntry>,
    free: Vec<usize>,
}

impl BinTable {
    /// Bin `b` starts on server `b mod n`.
    pub fn new(m: usize, n: usize) -> Self {
        let mut server_bins = vec![Vec::new(); n];
        let mut bin_pos = vec![0; m];
        for b in 0..m {
            bin_pos[b] = server_bins[b % n].len();
            server_bins[b % n].push(b);
        }
        BinTable {
            owner: (0..m).map(|b| b % n).collect(),
            bin_pos,
            server_bins,
            bin_flows: vec![Vec::new(); m],
            flows: Vec::new(),
            free: Vec::new(),
        }
    }

    pub fn bins(&self) -> usize {
        self.owner.len()
    }

    pub fn server_of(&self, bin: usize) -> usize {
        self.owner[bin]
    }

    pub fn bins_of(&self, server: usize) -> &[usize] {
        &self.server_bins[server]
    }

    pub fn flows_in(&self, bin: usize) -> usize {
        self.bin_flows[bin].len()
    }

    pub fn active_flows(&self) -> usize {
        self.bin_flows.iter().map(Vec::len).sum()
    }

    /// Adds a flow to `bin`, returning its handle.
    pub fn add_flow(&mut self, bin: usize) -> usize {
        let entry = FlowEntry {
            bin,
            pos: self.bin_flows[bin].len(),
            violated: false,
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.flows[id] = entry;
                id
            }
            None => {
                self.flows.push(entry);
                self.flows.len() - 1
            }
        };
        self.bin_flows[bin].push(id);
        id
    }

    /// Removes a flow, returning the server it was on.
    pub fn remove_flow(&mut self, id: usize) -> usize {
        let FlowEntry { bin, pos, .. } = self.flows[id];
        let list = &mut self.bin_flows[bin];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.flows[moved].pos = pos;
        }
        self.free.push(id);
        self.owner[bin]
    }

    /// Reassigns `bin` to `to` and marks its flows violated. Returns the
    /// number of flows violated for the first time.
    fn move_bin(&mut self, bin: usize, to: usize) -> u64 {
        let from = self.owner[bin];
        let pos = self.bin_pos[bin];
        let list = &mut self.server_bins[from];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.bin_pos[moved] = pos;
        }
        self.bin_pos[bin] = self.server_bins[to].len();
        self.server_bins[to].push(bin);
        self.owner[bin] = to;

        let mut fresh = 0;
        for &f in &self.bin_flows[bin] {
            if !self.flows[f].violated {
                self.flows[f].violated = true;
                fresh += 1;
            }
        }
        fresh
    }

    /// Checks that the map, the per-server lists and the flow positions agree.
    pub fn is_consistent(&self) -> bool {
        let listed: usize = self.server_bins.iter().map(Vec::len).sum();
        listed == self.owner.len()
            && self.server_bins.iter().enumerate().all(|(s, bins)| {
                bins.iter()
                    .enumerate()
                    .all(|(i, &b)| self.owner[b] == s && self.bin_pos[b] == i)
            })
            && self.bin_flows.iter().enumerate().all(|(b, fl)| {
                fl.iter()
                    .enumerate()
                    .all(|(i, &f)| self.flows[f].bin == b && self.flows[f].pos == i)
            })
    }
}

/// One bin move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reallocation {
    pub bin: usize,
    pub from: usize,
    pub to: usize,
    /// Flows in the bin that had not been violated before.
    pub violated: u64,
    pub flows_moved: u32,
}

/// Deallocates a uniformly chosen bin from `server` and hands it to an
/// invite server, else a server below `h`, else a uniformly random server.
/// Returns `None` when the server owns no bins. A bin that lands back on
/// its own server moves nothing and violates nothing.
pub fn reallocate_bin<R: Rng + ?Sized>(
    table: &mut BinTable,
    pool: &mut ServerPool,
    server: usize,
    t: f64,
    rng: &mut R,
) -> Option<Reallocation> {
    let bins = table.bins_of(server);
    if bins.is_empty() {
        return None;
    }
    let bin = bins[rng.gen_range(0..bins.len())];
    let to = pool
        .invite()
        .pick(rng)
        .or_else(|| pool.accepting().pick(rng))
        .unwrap_or_else(|| rng.gen_range(0..pool.n()));
    if to == server {
        return Some(Reallocation {
            bin,
            from: server,
            to,
            violated: 0,
            flows_moved: 0,
        });
    }
    let count = table.flows_in(bin) as u32;
    let violated = table.move_bin(bin, to);
    if count > 0 {
        pool.remove(server, count, t);
        pool.add(to, count, t);
    }
    Some(Reallocation {
        bin,
        from: server,
        to,
        violated,
        flows_moved: count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinSimStats {
    /// `violations` counts flows active in a bin when it was moved.
    pub stats: SimStats,
    pub reallocations: u64,
    /// Crossings of `h` at servers that owned no bins.
    pub anomalies: u64,
}

impl BinSimStats {
    pub fn violated_flows(&self) -> u64 {
        self.stats.violations
    }

    pub fn violation_rate(&self) -> f64 {
        self.stats.violation_rate()
    }
}

/// Runs one bin-based simulation. Deterministic for a given config.
pub fn run_bin_sim(config: &SimConfig) -> Result<BinSimStats> {
    config.validate()?;
    let SchemeConfig::BinBased { m, l, h } = config.scheme else {
        return Err(Error::Unsupported(
            "run_bin_sim needs a bin-based scheme".into(),
        ));
    };
    let params = &config.params;
    let n = params.n;
    if m < n {
        log::warn!("{m} bins for {n} servers: some servers start without bins");
    }
    let end = config.end();
    let arrival_rate = n as f64 * params.lambda;
    let departure_rate = 1.0 / params.beta;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool = ServerPool::new(n, l, h, config.warmup);
    let mut table = BinTable::new(m, n);
    let mut heap = BinaryHeap::new();
    let mut tracker = Tracker::new(config);
    let mut flow_id = 0u64;

    let mut out = BinSimStats {
        stats: SimStats {
            occupancy_hist: Vec::new(),
            violations: 0,
            total_flows: 0,
            discarded: 0,
            transfers: 0,
            series: Vec::new(),
            tracked_hist: Vec::new(),
            mean_occ: 0.0,
            events: 0,
        },
        reallocations: 0,
        anomalies: 0,
    };
    let mut next_arrival = exponential(&mut rng, arrival_rate);

    loop {
        let next_departure = heap.peek().map_or(f64::INFINITY, |d: &Departure| d.time);
        let t = next_arrival.min(next_departure);
        if t > end {
            break;
        }
        tracker.advance(t, pool.occupancy(tracker.server()));
        out.stats.events += 1;
        let measured = t >= config.warmup;

        if next_arrival > next_departure {
            let dep = heap.pop().expect("peeked");
            let server = table.remove_flow(dep.slot);
            pool.remove(server, 1, t);
            continue;
        }

        next_arrival = t + exponential(&mut rng, arrival_rate);
        if measured {
            out.stats.total_flows += 1;
        }
        let bin = hash_flow_to_bin(flow_id, m);
        flow_id += 1;
        let server = table.server_of(bin);
        let slot = table.add_flow(bin);
        pool.add(server, 1, t);
        heap.push(Departure {
            time: t + exponential(&mut rng, departure_rate),
            slot,
        });

        let Threshold::Finite(h) = h else { continue };
        let occ = pool.occupancy(server);
        let crossings = match config.realloc_policy {
            ReallocPolicy::OnePerCrossing if occ == h + 1 => 1,
            ReallocPolicy::OnePerCrossing => 0,
            ReallocPolicy::OnePerArrivalAbove if occ > h => 1,
            ReallocPolicy::OnePerArrivalAbove => 0,
            ReallocPolicy::WhileAbove if occ > h => table.bins_of(server).len(),
            ReallocPolicy::WhileAbove => 0,
        };
        for _ in 0..crossings {
            match reallocate_bin(&mut table, &mut pool, server, t, &mut rng) {
                None => {
                    out.anomalies += 1;
                    break;
                }
                Some(r) => {
                    out.reallocations += 1;
                    if measured {
                        out.stats.violations += r.violated;
                        out.stats.transfers += 1;
                    }
                    if r.to == server || pool.occupancy(server) <= h {
                        break;
                    }
                }
            }
        }
    }

    let (series, tracked_hist) = tracker.finish(pool.occupancy(config.tracked_server));
    let stats = &mut out.stats;
    stats.series = series;
    stats.tracked_hist = tracked_hist;
    stats.occupancy_hist = pool.histogram(end);
    stats.mean_occ = stats
        .occupancy_hist
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * p)
        .sum();
    Ok(out)
}
