//! Mean-field limit of the flow-level dynamics.
//!
//! The state is the tail sequence `s_i`, the fraction of servers with at
//! least `i` flows. Under scheme-specific assignment probabilities `q_{i-1}(s)`
//! it evolves as
//!
//! ```text
//! ds_i/dt = λ q_{i-1}(s) - i (s_i - s_{i+1}) / β,   i ≥ 1,
//! ```
//!
//! and its fixed points `p` solve `ρ q_{i-1}(p) = i p_i`.

mod assignment;
mod bisect;
mod fixed_point;
mod ode;

pub use assignment::{
    assignment_probs, q_jsq, q_power_of_d, q_pull_based, q_shedding, q_transfer_to_invite,
    q_transfer_to_least_loaded, AssignmentProbs,
};
pub use bisect::{bisect_increasing, BisectOutcome};
pub use fixed_point::{
    fixed_point_residual, jsq_fixed_point, least_loaded_i_star, pod_upper_bound,
    shedding_fixed_point, solve_fixed_point, solve_least_loaded_fixed_point,
    solve_pull_fixed_point, solve_transfer_invite_fixed_point, FixedPoint, Regime,
    SigmaSolveDiagnostics,
};
pub use ode::{default_dt, integrate_ode, ode_rhs, Trajectory};

use crate::dist::{to_pmf, FlowDistribution};
use crate::error::{Error, Result};

/// Values within this distance of 1 count as exactly 1 when a scheme
/// distinguishes `s_l < 1` from `s_l = 1`.
pub const UNIT_TOL: f64 = 1e-9;

pub(crate) fn is_unit(x: f64) -> bool {
    x >= 1.0 - UNIT_TOL
}

/// Tail sequence `s_0 = 1 ≥ s_1 ≥ … ≥ 0`; entries past the end are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    s: Vec<f64>,
}

impl MeanFieldState {
    /// Validates a tail. Deviations from monotonicity or `[0, 1]` up to
    /// [`UNIT_TOL`] are projected away; larger ones are rejected.
    pub fn from_tail(mut s: Vec<f64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidDistribution("empty tail".into()));
        }
        if (s[0] - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidDistribution(format!("s_0 = {} != 1", s[0])));
        }
        for i in 0..s.len() {
            let v = s[i];
            let upper = if i == 0 { 1.0 } else { s[i - 1] };
            if !v.is_finite() || v < -UNIT_TOL || v > upper + UNIT_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "s_{i} = {v} breaks monotonicity"
                )));
            }
        }
        project(&mut s);
        Ok(MeanFieldState { s })
    }

    pub fn from_distribution(dist: &FlowDistribution) -> Self {
        let mut s = dist.tail();
        project(&mut s);
        MeanFieldState { s }
    }

    /// All servers idle: `s = (1, 0, 0, …)`.
    pub fn empty(len: usize) -> Self {
        let mut s = vec![0.0; len.max(1)];
        s[0] = 1.0;
        MeanFieldState { s }
    }

    /// `s_i`, zero past the stored length.
    pub fn s(&self, i: usize) -> f64 {
        self.s.get(i).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Pads with zeros up to `len` entries.
    pub fn extended(mut self, len: usize) -> Self {
        if self.s.len() < len {
            self.s.resize(len, 0.0);
        }
        self
    }

    pub fn pmf(&self) -> Vec<f64> {
        to_pmf(&self.s)
    }

    pub fn to_distribution(&self) -> Result<FlowDistribution> {
        FlowDistribution::from_weights(self.pmf().into_iter().map(|p| p.max(0.0)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.s.iter().skip(1).sum()
    }
}

/// Clamps to `[0, 1]` and enforces `s_0 = 1` and monotonicity.
pub(crate) fn project(s: &mut [f64]) {
    if s.is_empty() {
        return;
    }
    s[0] = 1.0;
    for i in 1..s.len() {
        s[i] = s[i].clamp(0.0, s[i - 1]);
    }
}
