//! Assignment probabilities `q_{i-1}(s)` of each scheme.

use super::{is_unit, MeanFieldState};
use crate::error::{Error, Result};
use crate::scheme::{Choices, SchemeConfig, Threshold};

/// `q[k]`: probability that an arriving flow joins a server that currently
/// has exactly `k` flows. Entries past the end are zero. For shedding the
/// sum falls short of 1 by the blocked mass.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProbs {
    q: Vec<f64>,
}

impl AssignmentProbs {
    fn zeros(len: usize) -> Self {
        AssignmentProbs { q: vec![0.0; len] }
    }

    fn set(&mut self, k: usize, v: f64) {
        if k >= self.q.len() {
            self.q.resize(k + 1, 0.0);
        }
        self.q[k] = v;
    }

    pub fn get(&self, k: usize) -> f64 {
        self.q.get(k).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn sum(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// `p_k = s_k - s_{k+1}`.
fn p(s: &MeanFieldState, k: usize) -> f64 {
    s.s(k) - s.s(k + 1)
}

/// Upper end (exclusive) for levels `i` in spreads that run to infinity.
fn top(s: &MeanFieldState, h: Option<u32>) -> usize {
    match h {
        Some(h) => h as usize + 1,
        None => s.len() + 1,
    }
}

/// Least loaded of `d` sampled servers: `q_{i-1} = s_{i-1}^d - s_i^d`.
pub fn q_power_of_d(s: &MeanFieldState, d: u32) -> AssignmentProbs {
    let d = d as i32;
    AssignmentProbs {
        q: (0..s.len())
            .map(|k| s.s(k).powi(d) - s.s(k + 1).powi(d))
            .collect(),
    }
}

/// Flow-level join-the-shortest-queue.
pub fn q_jsq(s: &MeanFieldState, rho: f64) -> AssignmentProbs {
    q_transfer_to_least_loaded(s, 0, rho)
}

/// Spreads `mass` over levels `i ∈ from..to` in proportion to
/// `s_{i-1} - s_i`, normalized by `norm`.
fn spread(
    q: &mut AssignmentProbs,
    s: &MeanFieldState,
    from: usize,
    to: usize,
    mass: f64,
    norm: f64,
) {
    for i in from..to {
        q.set(i - 1, mass * p(s, i - 1) / norm);
    }
}

/// Pull-based assignment with invite threshold `l` and disinvite threshold `h`.
pub fn q_pull_based(s: &MeanFieldState, l: u32, h: Threshold, rho: f64) -> AssignmentProbs {
    let lu = l as usize;
    let mut q = AssignmentProbs::zeros(s.len());
    let s_l = s.s(lu);
    let s_h = h.finite().map_or(0.0, |h| s.s(h as usize));

    if !is_unit(s_l) {
        // some server has fewer than l flows: it holds an invite
        spread(&mut q, s, 1, lu + 1, 1.0, 1.0 - s_l);
    } else if !is_unit(s_h) {
        let inflow = l as f64 * (1.0 - s.s(lu + 1));
        if lu > 0 && rho <= inflow {
            q.set(lu - 1, 1.0);
        } else {
            if lu > 0 {
                q.set(lu - 1, inflow / rho);
            }
            spread(
                &mut q,
                s,
                lu + 1,
                top(s, h.finite()),
                (rho - inflow) / rho,
                1.0 - s_h,
            );
        }
    } else {
        saturated(
            &mut q,
            s,
            h.finite().expect("s_h = 1 needs a finite h"),
            rho,
        );
    }
    q
}

/// Every server is at or above `h`: freed slots at level `h` are refilled
/// first, the rest is assigned at random among servers above `h`.
fn saturated(q: &mut AssignmentProbs, s: &MeanFieldState, h: u32, rho: f64) {
    let hu = h as usize;
    let inflow = h as f64 * (1.0 - s.s(hu + 1));
    if rho <= inflow {
        q.set(hu - 1, 1.0);
        return;
    }
    if hu > 0 {
        q.set(hu - 1, inflow / rho);
    }
    spread(q, s, hu + 1, s.len() + 1, (rho - inflow) / rho, 1.0);
}

/// Random assignment with load shedding at `h`.
pub fn q_shedding(s: &MeanFieldState, h: Threshold) -> AssignmentProbs {
    let mut q = AssignmentProbs::zeros(s.len());
    spread(&mut q, s, 1, top(s, h.finite()), 1.0, 1.0);
    q
}

/// Random assignment; flows landing on a server with `h` flows are moved to
/// one holding an invite (fewer than `l` flows).
pub fn q_transfer_to_invite(s: &MeanFieldState, l: u32, h: u32, rho: f64) -> AssignmentProbs {
    let (lu, hu) = (l as usize, h as usize);
    let mut q = AssignmentProbs::zeros(s.len());
    let s_l = s.s(lu);
    let s_h = s.s(hu);

    if !is_unit(s_l) {
        spread(&mut q, s, 1, lu + 1, 1.0 - s_l + s_h, 1.0 - s_l);
        spread(&mut q, s, lu + 1, hu + 1, 1.0, 1.0);
    } else if !is_unit(s_h) {
        let inflow = l as f64 * (1.0 - s.s(lu + 1));
        if rho * s_h <= inflow {
            if lu > 0 {
                q.set(lu - 1, s_h);
            }
            spread(&mut q, s, lu + 1, hu + 1, 1.0, 1.0);
        } else {
            if lu > 0 {
                q.set(lu - 1, inflow / rho);
            }
            let extra = (rho * s_h - inflow) / rho;
            for i in lu + 1..=hu {
                let pi = p(s, i - 1);
                q.set(i - 1, pi + extra * pi / (1.0 - s_h));
            }
        }
    } else {
        saturated(&mut q, s, h, rho);
    }
    q
}

/// Random assignment; flows landing on a server with `h` flows are moved to
/// a least-loaded server.
pub fn q_transfer_to_least_loaded(s: &MeanFieldState, h: u32, rho: f64) -> AssignmentProbs {
    let hu = h as usize;
    let mut q = AssignmentProbs::zeros(s.len());
    // m = min{i : s_{i+1} < 1}
    let m = (0..).find(|&i| !is_unit(s.s(i + 1))).unwrap_or(0);
    let inflow = m as f64 * (1.0 - s.s(m + 1));

    if m < hu {
        let s_h = s.s(hu);
        if rho * s_h <= inflow {
            if m > 0 {
                q.set(m - 1, s_h);
            }
            spread(&mut q, s, m + 1, hu + 1, 1.0, 1.0);
        } else {
            if m > 0 {
                q.set(m - 1, inflow / rho);
            }
            q.set(m, p(s, m) + (rho * s_h - inflow) / rho);
            spread(&mut q, s, m + 2, hu + 1, 1.0, 1.0);
        }
    } else if rho <= inflow {
        q.set(m - 1, 1.0);
    } else {
        if m > 0 {
            q.set(m - 1, inflow / rho);
        }
        q.set(m, (rho - inflow) / rho);
    }
    q
}

/// Dispatches on the scheme. Bin-based assignment has no mean-field model.
pub fn assignment_probs(
    scheme: &SchemeConfig,
    s: &MeanFieldState,
    rho: f64,
) -> Result<AssignmentProbs> {
    Ok(match *scheme {
        SchemeConfig::PowerOfD {
            d: Choices::Sample(d),
        } => q_power_of_d(s, d),
        SchemeConfig::PowerOfD { d: Choices::All } => q_jsq(s, rho),
        SchemeConfig::PullBased { l, h } => q_pull_based(s, l, h, rho),
        SchemeConfig::Shedding { h } => q_shedding(s, h),
        SchemeConfig::TransferToInvite { l, h } => q_transfer_to_invite(s, l, h, rho),
        SchemeConfig::TransferToLeastLoaded { h } => q_transfer_to_least_loaded(s, h, rho),
        SchemeConfig::BinBased { .. } => {
            return Err(Error::Unsupported(
                "bin-based schemes have no mean-field model".into(),
            ))
        }
    })
}
