//! Packet-level performance as a function of the flow population.
//!
//! A packet metric `G(i)` maps the number of concurrent flows at a server to
//! a per-packet quantity in `[0, 1]`; [`g_tilde`] averages it over packets,
//! i.e. weighting occupancy `i` by `i·p_i`. The χ-delay tail
//! [`g_chi`] is the M/M/1 probability that a packet waits longer than χ mean
//! service times.

use crate::dist::FlowDistribution;
use crate::error::{Error, Result};
use crate::params::{ChiDelayParams, SystemParams};
use crate::poisson;
use crate::scheme::Threshold;

/// A packet-level metric `i ↦ G(i) ∈ [0, 1]`.
pub trait PacketMetric {
    fn eval(&self, occupancy: usize) -> f64;
}

impl<F: Fn(usize) -> f64> PacketMetric for F {
    fn eval(&self, occupancy: usize) -> f64 {
        self(occupancy)
    }
}

/// `G_χ` bound to a parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ChiDelay {
    pub chi: f64,
    pub params: SystemParams,
}

impl PacketMetric for ChiDelay {
    fn eval(&self, occupancy: usize) -> f64 {
        g_chi(occupancy, self.chi, &self.params)
    }
}

/// Probability that a packet's delay exceeds χ mean processing times when
/// `i` flows share the server: `e^{-χ(1 - iν/μ)}` for `i ≤ μ/ν`, else 1.
pub fn g_chi(i: usize, chi: f64, params: &SystemParams) -> f64 {
    if i > params.max_stable_occupancy() {
        return 1.0;
    }
    (-chi * (1.0 - i as f64 * params.nu / params.mu)).exp()
}

/// `G_χ` at a real-valued occupancy (no clamping); used for ρ itself.
fn g_chi_real(x: f64, chi: f64, params: &SystemParams) -> f64 {
    (-chi * (1.0 - x * params.nu / params.mu)).exp()
}

/// Packet-weighted average `Σ i G(i) p_i / Σ i p_i`.
pub fn g_tilde(dist: &FlowDistribution, g: &impl PacketMetric) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &p) in dist.probs().iter().enumerate().skip(1) {
        if p == 0.0 {
            continue;
        }
        let w = i as f64 * p;
        num += w * g.eval(i);
        den += w;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("no active flows: Σ i·p_i = 0"));
    }
    Ok(num / den)
}

/// χ-delay tail of flow-level JSQ in closed form.
///
/// Mixes `G_χ(k*)` and `G_χ(k*+1)` with the packet weights of the two-point
/// occupancy `p_{k*} = k*+1-ρ`, `p_{k*+1} = ρ-k*`; the weight on `G_χ(k*)` is
/// `k*(k*+1-ρ)/ρ`.
pub fn g_tilde_flow_jsq(chi: f64, params: &SystemParams) -> f64 {
    let rho = params.rho();
    let k = rho.floor();
    let w = k * (k + 1.0 - rho) / rho;
    let lo = g_chi(k as usize, chi, params);
    let hi = g_chi(k as usize + 1, chi, params);
    w * lo + (1.0 - w) * hi
}

/// χ-delay tail of packet-level random splitting: every server is an M/M/1
/// queue with arrival rate ρν.
pub fn g_tilde_pkt_random(chi: f64, params: &SystemParams) -> Result<f64> {
    let load = params.rho() * params.nu;
    if load >= params.mu {
        return Err(Error::Unstable {
            load,
            mu: params.mu,
        });
    }
    Ok(g_chi_real(params.rho(), chi, params))
}

/// χ-delay tail of random assignment with load shedding at `h`, in closed
/// form. `Threshold::Infinite` is plain random assignment (perfect
/// stickiness).
pub fn shedding_tail(h: Threshold, chi: f64, params: &SystemParams) -> Result<f64> {
    let rho = params.rho();
    if !(rho > 0.0) {
        return Err(Error::param("rho", "must be positive"));
    }
    if chi < 0.0 {
        return Err(Error::param("chi", "must be non-negative"));
    }
    if h == Threshold::Finite(0) {
        return Err(Error::UndefinedMetric("shedding at h = 0 admits no flows"));
    }
    let c = ChiDelayParams::new(chi, params);
    let cap = params.max_stable_occupancy() as u64;
    // b F_a(K-1): the packets that see a stable queue
    let stable = |k: u64| c.ln_b_chi + poisson::ln_cdf(k as i64 - 1, c.a_chi);

    let ln_value = match h {
        Threshold::Finite(h) if (h as u64) <= cap => {
            stable(h as u64) - poisson::ln_cdf(h as i64 - 1, rho)
        }
        Threshold::Finite(h) => {
            let h = h as u64;
            let saturated = poisson::ln_range(cap, h - 1, rho);
            poisson::ln_add_exp(stable(cap), saturated) - poisson::ln_cdf(h as i64 - 1, rho)
        }
        Threshold::Infinite => poisson::ln_add_exp(stable(cap), poisson::ln_upper_tail(cap, rho)),
    };
    Ok(ln_value.exp().min(1.0))
}

/// Stickiness violation of shedding at `h`: the Erlang blocking probability
/// `f_ρ(h) / F_ρ(h)`.
pub fn shedding_violation(h: u32, rho: f64) -> f64 {
    (poisson::ln_pmf(h as u64, rho) - poisson::ln_cdf(h as i64, rho)).exp()
}

/// One point of a violation / delay trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub h: u32,
    /// Stickiness violation probability ε.
    pub epsilon: f64,
    /// χ-delay tail probability at threshold `h`.
    pub g_chi: f64,
    /// `Ĝ_χ^∞ / Ĝ_χ^h`.
    pub improvement: f64,
}

impl TradeoffPoint {
    pub fn new(h: u32, epsilon: f64, g_chi: f64, baseline: f64) -> Self {
        let improvement = if g_chi > 0.0 {
            baseline / g_chi
        } else {
            f64::INFINITY
        };
        TradeoffPoint {
            h,
            epsilon,
            g_chi,
            improvement,
        }
    }
}

/// Shedding trade-off over a set of finite thresholds.
pub fn tradeoff_curve(
    h_values: &[u32],
    chi: f64,
    params: &SystemParams,
) -> Result<Vec<TradeoffPoint>> {
    let baseline = shedding_tail(Threshold::Infinite, chi, params)?;
    h_values
        .iter()
        .map(|&h| {
            let g = shedding_tail(Threshold::Finite(h), chi, params)?;
            Ok(TradeoffPoint::new(
                h,
                shedding_violation(h, params.rho()),
                g,
                baseline,
            ))
        })
        .collect()
}
