//! Fixed-step RK4 integration of the mean-field ODE.

use super::assignment::assignment_probs;
use super::{project, MeanFieldState};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::poisson::default_truncation;
use crate::scheme::SchemeConfig;

/// Bound and monotonicity violations larger than this reject a step.
const STEP_VIOLATION_TOL: f64 = 1e-6;
const MAX_HALVINGS: u32 = 40;
const MAX_SAMPLES: usize = 2000;

/// `β / 1000`.
pub fn default_dt(params: &SystemParams) -> f64 {
    1e-3 * params.beta
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times, including 0 and the final time.
    pub times: Vec<f64>,
    /// Mean occupancy `Σ_{i≥1} s_i` at each sample time.
    pub means: Vec<f64>,
    pub final_state: MeanFieldState,
    /// `‖ds/dt‖_∞` at the final state.
    pub residual: f64,
    pub steps: usize,
    /// Steps retried with a halved step size.
    pub rejected: usize,
}

/// `ds/dt` at `s`; `ds_0/dt = 0`.
pub fn ode_rhs(
    scheme: &SchemeConfig,
    params: &SystemParams,
    s: &MeanFieldState,
) -> Result<Vec<f64>> {
    let q = assignment_probs(scheme, s, params.rho())?;
    let mut ds = vec![0.0; s.len()];
    for (i, d) in ds.iter_mut().enumerate().skip(1) {
        *d = params.lambda * q.get(i - 1) - i as f64 * (s.s(i) - s.s(i + 1)) / params.beta;
    }
    Ok(ds)
}

fn state_len(scheme: &SchemeConfig, params: &SystemParams, s0: &MeanFieldState) -> usize {
    let h = match *scheme {
        SchemeConfig::PullBased { h, .. } | SchemeConfig::Shedding { h } => h.finite(),
        SchemeConfig::TransferToInvite { h, .. } | SchemeConfig::TransferToLeastLoaded { h } => {
            Some(h)
        }
        _ => None,
    };
    let by_h = h.map_or(0, |h| h as usize + 2);
    s0.len().max(by_h).max(default_truncation(params.rho()) + 2)
}

fn axpy(s: &[f64], dt: f64, k: &[f64]) -> Vec<f64> {
    s.iter().zip(k).map(|(a, b)| a + dt * b).collect()
}

fn projected(mut v: Vec<f64>) -> MeanFieldState {
    project(&mut v);
    MeanFieldState { s: v }
}

/// Largest amount by which `v` leaves `[0, 1]` or breaks monotonicity.
fn violation(v: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 1..v.len() {
        worst = worst.max(-v[i]).max(v[i] - 1.0).max(v[i] - v[i - 1]);
    }
    worst
}

fn rk4_candidate(
    scheme: &SchemeConfig,
    params: &SystemParams,
    s: &MeanFieldState,
    dt: f64,
) -> Result<Vec<f64>> {
    let y = s.as_slice();
    let k1 = ode_rhs(scheme, params, s)?;
    let k2 = ode_rhs(scheme, params, &projected(axpy(y, dt / 2.0, &k1)))?;
    let k3 = ode_rhs(scheme, params, &projected(axpy(y, dt / 2.0, &k2)))?;
    let k4 = ode_rhs(scheme, params, &projected(axpy(y, dt, &k3)))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates from `s0` over `[0, t_end]` with step `dt`.
///
/// The state is padded to cover the scheme's thresholds and the bulk of a
/// Poisson(ρ) tail. Each step is projected back onto valid tails; a step that
/// leaves them by more than 1e-6 is retried with half the step size.
pub fn integrate_ode(
    scheme: &SchemeConfig,
    params: &SystemParams,
    s0: &MeanFieldState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    scheme.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param(
            "t_end",
            format!("must be non-negative, got {t_end}"),
        ));
    }
    let len = state_len(scheme, params, s0);
    let mut s = s0.clone().extended(len);

    let total_steps = (t_end / dt).ceil() as usize;
    let sample_every = (total_steps / MAX_SAMPLES).max(1);
    let mut times = vec![0.0];
    let mut means = vec![s.mean()];
    let (mut t, mut steps, mut rejected) = (0.0, 0usize, 0usize);

    while t < t_end {
        let mut h = dt.min(t_end - t);
        let mut halvings = 0;
        let next = loop {
            let candidate = rk4_candidate(scheme, params, &s, h)?;
            if violation(&candidate) <= STEP_VIOLATION_TOL {
                break candidate;
            }
            halvings += 1;
            rejected += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step size underflow (dt = {h:e})"),
                });
            }
            h /= 2.0;
        };
        s = projected(next);
        t += h;
        steps += 1;
        if steps % sample_every == 0 || t >= t_end {
            times.push(t);
            means.push(s.mean());
        }
    }

    let residual = ode_rhs(scheme, params, &s)?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Trajectory {
        times,
        means,
        final_state: s,
        residual,
        steps,
        rejected,
    })
}
