//! Discrete-event simulation of flow-level assignment on `n` servers.
//!
//! Flows arrive as a Poisson process of rate `nλ` and last an exponential
//! time of mean β. Statistics are time-weighted over
//! `[warmup, warmup + horizon]`.

mod assign;
mod pool;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) use assign::thresholds;
pub use assign::{assign_flow, Assignment, Transfer};
pub use pool::{IndexedSet, ServerPool};

use crate::dist::{total_variation, FlowDistribution};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::scheme::SchemeConfig;

/// Which flow moves when a transfer scheme diverts load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransferMode {
    /// The arriving flow is sent elsewhere.
    #[default]
    Arriving,
    /// The arriving flow stays and a uniformly chosen resident flow of the
    /// overloaded server moves instead.
    Resident,
}

/// How many bins a server sheds when its load exceeds `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReallocPolicy {
    /// One bin per upward crossing from `h` to `h + 1`.
    OnePerCrossing,
    /// One bin per arrival that leaves the server above `h`.
    #[default]
    OnePerArrivalAbove,
    /// After every arrival, move bins until the server is back at `h` or
    /// has no bins left to give.
    WhileAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    #[default]
    Empty,
    /// Every server starts with this many flows.
    Uniform(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub scheme: SchemeConfig,
    pub seed: u64,
    /// Discarded initial period (s).
    pub warmup: f64,
    /// Measured period after the warmup (s).
    pub horizon: f64,
    pub tracked_server: usize,
    /// Spacing of the tracked-server time series (s).
    pub sample_interval: f64,
    pub initial: InitialState,
    pub transfer_mode: TransferMode,
    pub realloc_policy: ReallocPolicy,
}

impl SimConfig {
    /// Warmup 50β, horizon 200β, samples every β/10, empty start.
    pub fn new(params: SystemParams, scheme: SchemeConfig, seed: u64) -> Self {
        SimConfig {
            params,
            scheme,
            seed,
            warmup: 50.0 * params.beta,
            horizon: 200.0 * params.beta,
            tracked_server: 0,
            sample_interval: params.beta / 10.0,
            initial: InitialState::Empty,
            transfer_mode: TransferMode::Arriving,
            realloc_policy: ReallocPolicy::OnePerArrivalAbove,
        }
    }

    pub fn with_window(mut self, warmup: f64, horizon: f64) -> Self {
        self.warmup = warmup;
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scheme.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return Err(Error::param("warmup", "must be non-negative"));
        }
        if self.tracked_server >= self.params.n {
            return Err(Error::param("tracked_server", "must be below n"));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::param("sample_interval", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn end(&self) -> f64 {
        self.warmup + self.horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    /// Time-weighted fraction of servers with `i` flows.
    pub occupancy_hist: Vec<f64>,
    /// Flows discarded or moved during the measured window.
    pub violations: u64,
    /// Flows arriving during the measured window.
    pub total_flows: u64,
    pub discarded: u64,
    pub transfers: u64,
    /// `(time, occupancy)` of the tracked server.
    pub series: Vec<(f64, u32)>,
    /// Time-weighted occupancy distribution of the tracked server.
    pub tracked_hist: Vec<f64>,
    pub mean_occ: f64,
    pub events: u64,
}

impl SimStats {
    pub fn violation_rate(&self) -> f64 {
        if self.total_flows == 0 {
            0.0
        } else {
            self.violations as f64 / self.total_flows as f64
        }
    }

    pub fn distribution(&self) -> Result<FlowDistribution> {
        FlowDistribution::from_weights(self.occupancy_hist.clone())
    }

    /// Fraction of measured time the tracked server held at most `k` flows.
    pub fn tracked_fraction_at_most(&self, k: usize) -> f64 {
        self.tracked_hist.iter().take(k + 1).sum()
    }
}

/// ½ Σ |p̂_i − p_i|.
pub fn empirical_vs_theory(stats: &SimStats, theory: &FlowDistribution) -> f64 {
    total_variation(&stats.occupancy_hist, theory.probs())
}

/// Departure event; the heap pops the earliest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Departure {
    pub time: f64,
    pub slot: usize,
}

impl Eq for Departure {}

impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.slot.cmp(&self.slot))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Inverse-transform exponential variate.
pub(crate) fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Occupancy trace and time-weighted histogram of one server.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    server: usize,
    start: f64,
    end: f64,
    interval: f64,
    next_sample: f64,
    last_change: f64,
    pub series: Vec<(f64, u32)>,
    pub hist: Vec<f64>,
}

impl Tracker {
    pub fn new(config: &SimConfig) -> Self {
        Tracker {
            server: config.tracked_server,
            start: config.warmup,
            end: config.end(),
            interval: config.sample_interval,
            next_sample: config.warmup,
            last_change: config.warmup,
            series: Vec::new(),
            hist: Vec::new(),
        }
    }

    /// Emits samples and accrues time up to `t` at the current occupancy.
    pub fn advance(&mut self, t: f64, occ: u32) {
        let t = t.min(self.end);
        while self.next_sample <= t {
            self.series.push((self.next_sample, occ));
            self.next_sample = self.start + self.interval * (self.series.len() as f64);
        }
        if t > self.last_change {
            let k = occ as usize;
            if k >= self.hist.len() {
                self.hist.resize(k + 1, 0.0);
            }
            self.hist[k] += t - self.last_change;
            self.last_change = t;
        }
    }

    pub fn server(&self) -> usize {
        self.server
    }

    pub fn finish(mut self, occ: u32) -> (Vec<(f64, u32)>, Vec<f64>) {
        self.advance(self.end, occ);
        let span = self.end - self.start;
        self.hist.iter_mut().for_each(|v| *v /= span);
        (self.series, self.hist)
    }
}

#[derive(Debug, Clone, Copy)]
struct FlowSlot {
    server: usize,
    /// Index in the server's resident list.
    pos: usize,
    violated: bool,
}

/// Active flows with per-server resident lists.
#[derive(Debug, Default)]
struct Flows {
    slots: Vec<FlowSlot>,
    free: Vec<usize>,
    resident: Vec<Vec<usize>>,
}

impl Flows {
    fn new(n: usize) -> Self {
        Flows {
            resident: vec![Vec::new(); n],
            ..Default::default()
        }
    }

    fn insert(&mut self, server: usize) -> usize {
        let pos = self.resident[server].len();
        let slot = FlowSlot {
            server,
            pos,
            violated: false,
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.slots[id] = slot;
                id
            }
            None => {
                self.slots.push(slot);
                self.slots.len() - 1
            }
        };
        self.resident[server].push(id);
        id
    }

    fn detach(&mut self, id: usize) {
        let FlowSlot { server, pos, .. } = self.slots[id];
        let list = &mut self.resident[server];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.slots[moved].pos = pos;
        }
    }

    fn remove(&mut self, id: usize) -> usize {
        self.detach(id);
        self.free.push(id);
        self.slots[id].server
    }

    fn relocate(&mut self, id: usize, to: usize) {
        self.detach(id);
        self.slots[id].server = to;
        self.slots[id].pos = self.resident[to].len();
        self.resident[to].push(id);
    }
}

/// Runs one flow-level simulation. Deterministic for a given config.
pub fn run_flow_sim(config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    if let SchemeConfig::BinBased { .. } = config.scheme {
        return Err(Error::Unsupported(
            "use run_bin_sim for bin-based schemes".into(),
        ));
    }
    let params = &config.params;
    let n = params.n;
    let (l, h) = thresholds(&config.scheme);
    let end = config.end();
    let arrival_rate = n as f64 * params.lambda;
    let departure_rate = 1.0 / params.beta;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool = ServerPool::new(n, l, h, config.warmup);
    let mut flows = Flows::new(n);
    let mut heap = BinaryHeap::new();
    let mut tracker = Tracker::new(config);

    if let InitialState::Uniform(k) = config.initial {
        for server in 0..n {
            for _ in 0..k {
                let slot = flows.insert(server);
                heap.push(Departure {
                    time: exponential(&mut rng, departure_rate),
                    slot,
                });
            }
            pool.add(server, k, 0.0);
        }
    }

    let mut stats = SimStats {
        occupancy_hist: Vec::new(),
        violations: 0,
        total_flows: 0,
        discarded: 0,
        transfers: 0,
        series: Vec::new(),
        tracked_hist: Vec::new(),
        mean_occ: 0.0,
        events: 0,
    };
    let mut next_arrival = exponential(&mut rng, arrival_rate);

    loop {
        let next_departure = heap.peek().map_or(f64::INFINITY, |d: &Departure| d.time);
        let t = next_arrival.min(next_departure);
        if t > end {
            break;
        }
        tracker.advance(t, pool.occupancy(tracker.server()));
        stats.events += 1;
        let measured = t >= config.warmup;

        if next_arrival <= next_departure {
            next_arrival = t + exponential(&mut rng, arrival_rate);
            if measured {
                stats.total_flows += 1;
            }
            let a = assign_flow(&config.scheme, &pool, &mut rng)?;
            let Some(server) = a.server else {
                if measured {
                    stats.violations += 1;
                    stats.discarded += 1;
                }
                continue;
            };
            let target = match (a.transfer, config.transfer_mode) {
                (Some(tr), TransferMode::Resident) if !flows.resident[tr.from].is_empty() => {
                    // the newcomer stays; a resident flow moves
                    let list = &flows.resident[tr.from];
                    let victim = list[rng.gen_range(0..list.len())];
                    flows.relocate(victim, tr.to);
                    if measured {
                        stats.transfers += 1;
                        if !flows.slots[victim].violated {
                            stats.violations += 1;
                        }
                    }
                    flows.slots[victim].violated = true;
                    pool.remove(tr.from, 1, t);
                    pool.add(tr.to, 1, t);
                    tr.from
                }
                _ => {
                    if measured && a.violation {
                        stats.violations += 1;
                        stats.transfers += 1;
                    }
                    server
                }
            };
            let slot = flows.insert(target);
            flows.slots[slot].violated =
                a.violation && config.transfer_mode == TransferMode::Arriving;
            pool.add(target, 1, t);
            heap.push(Departure {
                time: t + exponential(&mut rng, departure_rate),
                slot,
            });
        } else {
            let dep = heap.pop().expect("peeked");
            let server = flows.remove(dep.slot);
            pool.remove(server, 1, t);
        }
    }

    let (series, tracked_hist) = tracker.finish(pool.occupancy(config.tracked_server));
    stats.series = series;
    stats.tracked_hist = tracked_hist;
    stats.occupancy_hist = pool.histogram(end);
    stats.mean_occ = stats
        .occupancy_hist
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * p)
        .sum();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{Choices, Threshold};

    fn small(rho: f64, n: usize) -> SystemParams {
        SystemParams::baseline().with_rho(rho).with_servers(n)
    }

    #[test]
    fn departure_heap_pops_earliest() {
        let mut heap = BinaryHeap::new();
        for (time, slot) in [(3.0, 0), (1.0, 1), (2.0, 2), (1.0, 0)] {
            heap.push(Departure { time, slot });
        }
        let order: Vec<_> = std::iter::from_fn(|| heap.pop())
            .map(|d| (d.time, d.slot))
            .collect();
        assert_eq!(order, vec![(1.0, 0), (1.0, 1), (2.0, 2), (3.0, 0)]);
    }

    #[test]
    fn exponential_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m: f64 = (0..200_000)
            .map(|_| exponential(&mut rng, 4.0))
            .sum::<f64>()
            / 200_000.0;
        assert!((m - 0.25).abs() < 0.003);
    }

    #[test]
    fn config_validation() {
        let p = small(3.0, 10);
        let mut c = SimConfig::new(p, SchemeConfig::random(), 1);
        assert!(c.validate().is_ok());
        c.horizon = 0.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::new(p, SchemeConfig::random(), 1);
        c.tracked_server = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn same_seed_same_stats() {
        let p = small(5.0, 50);
        let c = SimConfig::new(
            p,
            SchemeConfig::PowerOfD {
                d: Choices::Sample(2),
            },
            42,
        )
        .with_window(5.0 * p.beta, 20.0 * p.beta);
        assert_eq!(run_flow_sim(&c).unwrap(), run_flow_sim(&c).unwrap());
        let other = SimConfig {
            seed: 43,
            ..c.clone()
        };
        assert_ne!(run_flow_sim(&c).unwrap(), run_flow_sim(&other).unwrap());
    }

    #[test]
    fn random_assignment_is_poisson() {
        let p = small(3.0, 200);
        let c = SimConfig::new(p, SchemeConfig::random(), 7);
        let stats = run_flow_sim(&c).unwrap();
        let sum: f64 = stats.occupancy_hist.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let tv = empirical_vs_theory(&stats, &FlowDistribution::poisson(3.0, 40));
        assert!(tv < 0.02, "tv = {tv}");
        assert_eq!(stats.violations, 0);
    }

    #[test]
    fn shedding_never_exceeds_h_and_counts_blocking() {
        let p = small(4.0, 100);
        let c = SimConfig::new(
            p,
            SchemeConfig::Shedding {
                h: Threshold::Finite(5),
            },
            3,
        );
        let stats = run_flow_sim(&c).unwrap();
        assert!(stats.occupancy_hist.len() <= 6);
        assert_eq!(stats.violations, stats.discarded);
        let eps = crate::metrics::shedding_violation(5, 4.0);
        assert!((stats.violation_rate() - eps).abs() / eps < 0.05);
    }

    #[test]
    fn resident_mode_moves_flows_without_changing_counts() {
        let p = small(5.0, 50);
        let scheme = SchemeConfig::TransferToLeastLoaded { h: 6 };
        let mut c = SimConfig::new(p, scheme, 9).with_window(5.0 * p.beta, 30.0 * p.beta);
        let a = run_flow_sim(&c).unwrap();
        c.transfer_mode = TransferMode::Resident;
        let b = run_flow_sim(&c).unwrap();
        assert!(b.violations <= b.transfers);
        assert!(a.occupancy_hist.len() <= 7 && b.occupancy_hist.len() <= 7);
    }

    #[test]
    fn tracked_series_spacing() {
        let p = small(2.0, 5);
        let mut c = SimConfig::new(p, SchemeConfig::random(), 1).with_window(1.0, 10.0);
        c.sample_interval = 0.5;
        let stats = run_flow_sim(&c).unwrap();
        assert_eq!(stats.series.len(), 21);
        assert_eq!(stats.series[0].0, 1.0);
        assert!((stats.tracked_hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_fill_starts_loaded() {
        let p = small(3.0, 20);
        let mut c = SimConfig::new(p, SchemeConfig::jsq(), 2).with_window(0.0, 0.001);
        c.initial = InitialState::Uniform(3);
        let stats = run_flow_sim(&c).unwrap();
        assert!(stats.occupancy_hist[3] > 0.9);
    }
}
