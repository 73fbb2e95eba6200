//! Occupancy distributions and their tail representation.

use crate::error::{Error, Result};
use crate::poisson;

/// Tolerance on the total mass of a pmf handed to [`FlowDistribution::new`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Fraction of servers with exactly `i` active flows, `i = 0..=i_max`.
///
/// Construction renormalizes the input, so the stored pmf sums to one up to
/// rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDistribution {
    p: Vec<f64>,
}

impl FlowDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("empty pmf".into()));
        }
        if let Some((i, &v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("p[{i}] = {v}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(Self::from_weights_unchecked(p, total))
    }

    /// Normalizes non-negative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = weights
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("weight[{i}] = {v}")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("zero total weight".into()));
        }
        Ok(Self::from_weights_unchecked(weights, total))
    }

    /// Builds a pmf from log-weights: `log_weights[k]` is the weight of
    /// occupancy `offset + k`.
    pub fn from_log_weights(offset: usize, log_weights: &[f64]) -> Result<Self> {
        let mut p = vec![0.0; offset];
        p.extend(poisson::normalize_log_weights(log_weights));
        FlowDistribution::new(p)
    }

    fn from_weights_unchecked(mut p: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            p.iter_mut().for_each(|v| *v /= total);
        }
        FlowDistribution { p }
    }

    pub fn point_mass(k: usize) -> Self {
        let mut p = vec![0.0; k + 1];
        p[k] = 1.0;
        FlowDistribution { p }
    }

    /// Poisson(ρ) truncated to `0..=i_max` and renormalized.
    pub fn poisson(rho: f64, i_max: usize) -> Self {
        FlowDistribution {
            p: poisson::truncated_pmf(rho, i_max),
        }
    }

    /// Rebuilds a pmf from a tail sequence (`p_i = s_i - s_{i+1}`).
    pub fn from_tail(s: &[f64]) -> Result<Self> {
        FlowDistribution::new(to_pmf(s))
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.p
    }

    /// Probability of occupancy `i` (zero beyond the truncation).
    pub fn prob(&self, i: usize) -> f64 {
        self.p.get(i).copied().unwrap_or(0.0)
    }

    pub fn i_max(&self) -> usize {
        self.p.len() - 1
    }

    pub fn tail(&self) -> Vec<f64> {
        to_tail(self)
    }

    pub fn mean(&self) -> f64 {
        mean_occupancy(self)
    }

    /// Smallest and largest occupancy with positive mass.
    pub fn support(&self) -> (usize, usize) {
        let lo = self.p.iter().position(|&v| v > 0.0).unwrap_or(0);
        let hi = self.p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        (lo, hi)
    }

    /// ½ Σ |p_i − q_i| over the union of both supports.
    pub fn total_variation(&self, other: &FlowDistribution) -> f64 {
        total_variation(&self.p, &other.p)
    }
}

/// Tail view `s_i = Σ_{j≥i} p_j`, with `s_0 = 1` exactly.
pub fn to_tail(dist: &FlowDistribution) -> Vec<f64> {
    let p = dist.probs();
    let mut s = vec![0.0; p.len()];
    let mut acc = 0.0;
    for i in (0..p.len()).rev() {
        acc += p[i];
        s[i] = acc.min(1.0);
    }
    s[0] = 1.0;
    s
}

/// Inverse of [`to_tail`]: `p_i = s_i − s_{i+1}` with `s` zero past its end.
pub fn to_pmf(s: &[f64]) -> Vec<f64> {
    (0..s.len())
        .map(|i| s[i] - s.get(i + 1).copied().unwrap_or(0.0))
        .collect()
}

/// Σ i·p_i.
pub fn mean_occupancy(dist: &FlowDistribution) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| i as f64 * p)
        .sum()
}

/// ½ Σ |a_i − b_i|, zero-padding the shorter sequence.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    0.5 * (0..len)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0.0);
            let y = b.get(i).copied().unwrap_or(0.0);
            (x - y).abs()
        })
        .sum::<f64>()
}
