//! Fixed points of the mean-field dynamics.

use super::assignment::assignment_probs;
use super::bisect::bisect_increasing;
use super::MeanFieldState;
use crate::dist::FlowDistribution;
use crate::error::{Error, Result};
use crate::poisson::{default_truncation, ln_factorial};
use crate::scheme::{Choices, SchemeConfig, Threshold};

/// Largest acceptable `|carried(σ) − ρ|` after bisection.
pub const SIGMA_RESIDUAL_TOL: f64 = 1e-10;

/// Log-weight gap below the running maximum at which open-ended supports are
/// cut (e^-37 ≈ 8.5e-17).
const LN_CUTOFF: f64 = 37.0;

/// Which closed form produced a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// ρ < l: Erlang loss system on `0..=l`.
    ErlangLoss,
    /// Truncated Poisson(σ) on `l..=h`.
    Window,
    /// ρ ≥ h: every server holds at least `h` flows.
    Saturated,
    /// Transfer-to-invite with mass below `l`.
    Hybrid,
    /// Closed form without a σ parameter.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSolveDiagnostics {
    pub regime: Regime,
    pub sigma: f64,
    pub iterations: usize,
    /// `|carried(σ) − ρ|` at the returned σ.
    pub residual: f64,
    /// Dummy flows created per regular arrival: `l p_l / σ` in the window
    /// regime, `h p_h / σ` when saturated.
    pub lre: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub dist: FlowDistribution,
    pub diagnostics: Option<SigmaSolveDiagnostics>,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "rho",
            format!("must be finite and non-negative, got {rho}"),
        ))
    }
}

fn check_window(l: u32, h: Threshold) -> Result<()> {
    match h {
        Threshold::Finite(h) if h <= l => Err(Error::param(
            "h",
            format!("high threshold {h} must exceed low threshold {l}"),
        )),
        _ => Ok(()),
    }
}

/// `ln(ρ^i / i!)`.
fn ln_poisson_weight(i: usize, ln_rho: f64) -> f64 {
    i as f64 * ln_rho - ln_factorial(i as u64)
}

/// `σ^{i-lo} lo!/i!` on `lo..=hi`, or from `lo` until the terms are
/// negligible when `hi` is `None`.
fn window_log_weights(sigma: f64, lo: usize, hi: Option<usize>) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0];
    }
    let ln_sigma = sigma.ln();
    let ln_lo = ln_factorial(lo as u64);
    let weight = |i: usize| (i - lo) as f64 * ln_sigma - ln_factorial(i as u64) + ln_lo;
    match hi {
        Some(hi) => (lo..=hi).map(weight).collect(),
        None => {
            let mut logs = Vec::new();
            let mut max = f64::NEG_INFINITY;
            for i in lo.. {
                let w = weight(i);
                max = max.max(w);
                logs.push(w);
                if i as f64 > sigma && w < max - LN_CUTOFF {
                    break;
                }
            }
            logs
        }
    }
}

/// Solves `mean(σ) = ρ` for a family of distributions whose mean increases
/// with σ.
fn solve_sigma(
    rho: f64,
    bracket: (f64, f64),
    build: impl Fn(f64) -> Result<FlowDistribution>,
) -> Result<(FlowDistribution, f64, usize, f64)> {
    let out = bisect_increasing(|sigma| Ok(build(sigma)?.mean()), rho, bracket.0, bracket.1)?;
    let dist = build(out.x)?;
    let residual = (dist.mean() - rho).abs();
    if residual > SIGMA_RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            what: "sigma bisection",
            residual,
        });
    }
    Ok((dist, out.x, out.iterations, residual))
}

fn initial_bracket(rho: f64, l: u32, h: Threshold) -> (f64, f64) {
    let (lo, width) = match h {
        Threshold::Finite(h) => ((rho - h as f64).max(0.0), (h - l + 1) as f64),
        Threshold::Infinite => (0.0, (default_truncation(rho) as f64 - l as f64).max(1.0)),
    };
    (lo, rho + 10.0 * width)
}

/// Pull-based fixed point for thresholds `l < h`.
///
/// ρ < l gives an Erlang loss distribution on `0..=l` with offered load σ;
/// l ≤ ρ < h a Poisson(σ) truncated to `[l, h]`; ρ ≥ h the tail
/// `p_i ∝ σ^{i-h} h!/i!` on `h..`. In each case σ is fixed by the mean
/// being ρ.
pub fn solve_pull_fixed_point(
    rho: f64,
    l: u32,
    h: Threshold,
) -> Result<(FlowDistribution, SigmaSolveDiagnostics)> {
    check_rho(rho)?;
    check_window(l, h)?;
    let (regime, lo, hi) = if rho < l as f64 {
        (Regime::ErlangLoss, 0, Some(l as usize))
    } else if h.exceeded_by(rho) {
        (Regime::Saturated, h.finite().unwrap() as usize, None)
    } else {
        (Regime::Window, l as usize, h.finite().map(|h| h as usize))
    };
    let build =
        |sigma: f64| FlowDistribution::from_log_weights(lo, &window_log_weights(sigma, lo, hi));
    let (dist, sigma, iterations, residual) = solve_sigma(rho, initial_bracket(rho, l, h), build)?;
    let lre = match regime {
        Regime::ErlangLoss => None,
        _ if sigma > 0.0 => Some(lo as f64 * dist.prob(lo) / sigma),
        _ => None,
    };
    Ok((
        dist,
        SigmaSolveDiagnostics {
            regime,
            sigma,
            iterations,
            residual,
            lre,
        },
    ))
}

/// Poisson(ρ) truncated at `h`; `Threshold::Infinite` keeps all but a
/// negligible tail.
pub fn shedding_fixed_point(rho: f64, h: Threshold) -> Result<FlowDistribution> {
    check_rho(rho)?;
    let top = match h {
        Threshold::Finite(h) => h as usize,
        Threshold::Infinite => default_truncation(rho),
    };
    Ok(FlowDistribution::poisson(rho, top))
}

/// Two-point distribution on `⌊ρ⌋` and `⌊ρ⌋ + 1` with mean ρ.
pub fn jsq_fixed_point(rho: f64) -> Result<FlowDistribution> {
    check_rho(rho)?;
    let k = rho.floor();
    let mut p = vec![0.0; k as usize + 2];
    p[k as usize] = k + 1.0 - rho;
    p[k as usize + 1] = rho - k;
    FlowDistribution::new(p)
}

/// `p_i ∝ σ^i/i!` up to `l`, `σ^l ρ^{i-l}/i!` on `l+1..=h`.
fn hybrid_log_weights(sigma: f64, rho: f64, l: usize, h: usize) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0];
    }
    let (ln_sigma, ln_rho) = (sigma.ln(), rho.ln());
    (0..=h)
        .map(|i| {
            let pow = if i <= l {
                i as f64 * ln_sigma
            } else {
                l as f64 * ln_sigma + (i - l) as f64 * ln_rho
            };
            pow - ln_factorial(i as u64)
        })
        .collect()
}

/// Whether Poisson(ρ) truncated to `[l, h]` has mean above ρ. When it does,
/// the pull-based window form is not a fixed point of transfer-to-invite and
/// some servers sit below `l`.
fn invite_window_overshoots(rho: f64, l: u32, h: u32) -> Result<bool> {
    let ln_rho = rho.ln();
    let logs: Vec<f64> = (l as usize..=h as usize)
        .map(|i| ln_poisson_weight(i, ln_rho))
        .collect();
    Ok(FlowDistribution::from_log_weights(l as usize, &logs)?.mean() > rho)
}

/// Transfer-to-invite fixed point for `l < h`.
///
/// ρ ≥ h shares the saturated pull-based form. Otherwise the pull-based
/// window form applies when it is self-consistent, and the hybrid form
/// `σ^i/i!` below `l`, `σ^l ρ^{i-l}/i!` above, with mean ρ, applies when it
/// is not (always the case for ρ < l).
pub fn solve_transfer_invite_fixed_point(
    rho: f64,
    l: u32,
    h: u32,
) -> Result<(FlowDistribution, SigmaSolveDiagnostics)> {
    check_rho(rho)?;
    check_window(l, Threshold::Finite(h))?;
    let hybrid =
        rho < l as f64 || (rho < h as f64 && rho > 0.0 && invite_window_overshoots(rho, l, h)?);
    if !hybrid {
        return solve_pull_fixed_point(rho, l, Threshold::Finite(h));
    }
    let (lu, hu) = (l as usize, h as usize);
    let build =
        |sigma: f64| FlowDistribution::from_log_weights(0, &hybrid_log_weights(sigma, rho, lu, hu));
    let (dist, sigma, iterations, residual) =
        solve_sigma(rho, initial_bracket(rho, l, Threshold::Finite(h)), build)?;
    Ok((
        dist,
        SigmaSolveDiagnostics {
            regime: Regime::Hybrid,
            sigma,
            iterations,
            residual,
            lre: None,
        },
    ))
}

/// `i* = min{i : ρ^i/i! > ρ^h/h!}`, for ρ < h.
pub fn least_loaded_i_star(rho: f64, h: u32) -> usize {
    let ln_rho = rho.ln();
    let ln_h = ln_poisson_weight(h as usize, ln_rho);
    (0..h as usize)
        .find(|&i| ln_poisson_weight(i, ln_rho) > ln_h)
        .unwrap_or(h as usize)
}

/// Transfer-to-least-loaded fixed point.
///
/// For ρ < h the support is `[i*, h]` with `p_i ∝ ρ^i/i!` above `i*` and a
/// reduced mass at `i*`; for ρ ≥ h the JSQ two-point distribution.
pub fn solve_least_loaded_fixed_point(rho: f64, h: u32) -> Result<FlowDistribution> {
    check_rho(rho)?;
    if h == 0 {
        return Err(Error::param("h", "must be at least 1"));
    }
    if rho >= h as f64 {
        return jsq_fixed_point(rho);
    }
    let i_star = least_loaded_i_star(rho, h);
    if i_star == 0 {
        return Err(Error::Unsupported(format!(
            "least-loaded fixed point with i* = 0 (rho = {rho}, h = {h})"
        )));
    }
    let ln_rho = rho.ln();
    let ln_h = ln_poisson_weight(h as usize, ln_rho);
    // weight at i*: ρ/(ρ - i*) (A - 1), A = f(i*)/f(h) > 1
    let gap = ln_poisson_weight(i_star, ln_rho) - ln_h;
    let ln_a_minus_one = if gap < 30.0 {
        gap.exp_m1().ln()
    } else {
        gap + (-(-gap).exp_m1()).ln()
    };
    let mut logs = vec![(rho / (rho - i_star as f64)).ln() + ln_a_minus_one];
    logs.extend((i_star + 1..=h as usize).map(|i| ln_poisson_weight(i, ln_rho) - ln_h));
    let dist = FlowDistribution::from_log_weights(i_star, &logs)?;
    let deviation = (dist.mean() - rho).abs();
    if deviation > 1e-8 {
        log::warn!(
            "least-loaded fixed point mean {} deviates from rho = {rho}",
            dist.mean()
        );
    }
    Ok(dist)
}

/// Upper bound on the power-of-d tail: 1 up to `k* = ⌊ρ⌋`, then
/// `(ρ/(k*+1))^{(d^j - 1)/(d - 1)}` with `j = i - k*` (exponent `j` for d = 1).
pub fn pod_upper_bound(rho: f64, d: u32, i: usize) -> f64 {
    let k = rho.floor();
    if i as f64 <= k {
        return 1.0;
    }
    let j = i as f64 - k;
    let exponent = if d == 1 {
        j
    } else {
        let d = d as f64;
        (d.powf(j) - 1.0) / (d - 1.0)
    };
    let ln = exponent * (rho / (k + 1.0)).ln();
    if ln.is_nan() {
        0.0
    } else {
        ln.exp()
    }
}

/// Closed-form fixed point for any scheme that has one.
pub fn solve_fixed_point(scheme: &SchemeConfig, rho: f64) -> Result<FixedPoint> {
    scheme.validate()?;
    let direct = |dist| FixedPoint {
        dist,
        diagnostics: None,
    };
    let solved = |(dist, diag)| FixedPoint {
        dist,
        diagnostics: Some(diag),
    };
    match *scheme {
        SchemeConfig::PowerOfD {
            d: Choices::Sample(1),
        } => shedding_fixed_point(rho, Threshold::Infinite).map(direct),
        SchemeConfig::PowerOfD { d: Choices::All } => jsq_fixed_point(rho).map(direct),
        SchemeConfig::PullBased { l, h } => solve_pull_fixed_point(rho, l, h).map(solved),
        SchemeConfig::Shedding { h } => shedding_fixed_point(rho, h).map(direct),
        SchemeConfig::TransferToInvite { l, h } => {
            solve_transfer_invite_fixed_point(rho, l, h).map(solved)
        }
        SchemeConfig::TransferToLeastLoaded { h } => {
            solve_least_loaded_fixed_point(rho, h).map(direct)
        }
        SchemeConfig::PowerOfD { .. } | SchemeConfig::BinBased { .. } => Err(Error::Unsupported(
            format!("{scheme} has no closed-form fixed point"),
        )),
    }
}

/// `max_i |ρ q_{i-1}(p) - i p_i|`.
pub fn fixed_point_residual(
    scheme: &SchemeConfig,
    dist: &FlowDistribution,
    rho: f64,
) -> Result<f64> {
    let state = MeanFieldState::from_distribution(dist).extended(dist.i_max() + 3);
    let q = assignment_probs(scheme, &state, rho)?;
    Ok((1..=state.len())
        .map(|i| (rho * q.get(i - 1) - i as f64 * dist.prob(i)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson;
    use proptest::prelude::*;

    fn tv(a: &FlowDistribution, b: &FlowDistribution) -> f64 {
        a.total_variation(b)
    }

    #[test]
    fn jsq_examples() {
        assert_eq!(jsq_fixed_point(150.0).unwrap().prob(150), 1.0);
        let d = jsq_fixed_point(150.5).unwrap();
        assert_eq!((d.prob(150), d.prob(151)), (0.5, 0.5));
        let d = jsq_fixed_point(0.3).unwrap();
        assert!((d.prob(0) - 0.7).abs() < 1e-15 && (d.prob(1) - 0.3).abs() < 1e-15);
        assert!(jsq_fixed_point(-1.0).is_err());
    }

    #[test]
    fn pod_bound_examples() {
        assert_eq!(pod_upper_bound(1.5, 2, 1), 1.0);
        assert!((pod_upper_bound(1.5, 2, 2) - 0.75).abs() < 1e-15);
        assert!((pod_upper_bound(1.5, 2, 3) - 0.421875).abs() < 1e-15);
        assert!((pod_upper_bound(1.5, 1, 3) - 0.75f64.powi(2)).abs() < 1e-15);
        assert!(pod_upper_bound(150.0, 1_000_000, 152) < 1e-300);
        assert!(pod_upper_bound(150.0, 1_000_000, 151) > 0.99);
        assert_eq!(pod_upper_bound(150.0, 2, 5000), 0.0);
    }

    #[test]
    fn pull_with_adjacent_thresholds_is_jsq() {
        for rho in [150.0f64, 150.3, 2.7, 0.4] {
            let k = rho.floor() as u32;
            let (d, diag) = solve_pull_fixed_point(rho, k, Threshold::Finite(k + 1)).unwrap();
            assert!(tv(&d, &jsq_fixed_point(rho).unwrap()) < 1e-9, "rho = {rho}");
            assert!(diag.residual <= SIGMA_RESIDUAL_TOL);
        }
    }

    #[test]
    fn pull_without_thresholds_is_poisson() {
        for rho in [0.5, 3.0, 150.0] {
            let (d, diag) = solve_pull_fixed_point(rho, 0, Threshold::Infinite).unwrap();
            assert!((diag.sigma - rho).abs() < 1e-9 * rho.max(1.0));
            let oracle = FlowDistribution::poisson(rho, d.i_max());
            assert!(tv(&d, &oracle) < 1e-12);
        }
    }

    #[test]
    fn pull_regimes_and_lre() {
        let (d, diag) = solve_pull_fixed_point(150.0, 140, Threshold::Finite(160)).unwrap();
        assert_eq!(diag.regime, Regime::Window);
        assert_eq!(d.support(), (140, 160));
        let lre = diag.lre.unwrap();
        assert!((lre - 140.0 * d.prob(140) / diag.sigma).abs() < 1e-15);

        let (d, diag) = solve_pull_fixed_point(3.0, 5, Threshold::Finite(8)).unwrap();
        assert_eq!(diag.regime, Regime::ErlangLoss);
        assert_eq!(d.i_max(), 5);
        assert!((diag.sigma * (1.0 - d.prob(5)) - 3.0).abs() < 1e-10);

        let (d, diag) = solve_pull_fixed_point(150.0, 100, Threshold::Finite(120)).unwrap();
        assert_eq!(diag.regime, Regime::Saturated);
        assert_eq!(d.support().0, 120);
        assert!((diag.sigma - (150.0 - 120.0 * d.prob(120))).abs() < 1e-9);
        assert!(d.probs().last().unwrap() < &1e-15);
    }

    #[test]
    fn shedding_examples() {
        assert_eq!(
            shedding_fixed_point(3.0, Threshold::Finite(0))
                .unwrap()
                .probs(),
            &[1.0]
        );
        let d = shedding_fixed_point(150.0, Threshold::Finite(160)).unwrap();
        let eps = crate::metrics::shedding_violation(160, 150.0);
        assert!((d.prob(160) - eps).abs() < 1e-12);
        let full = shedding_fixed_point(3.0, Threshold::Infinite).unwrap();
        assert!((full.mean() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn transfer_invite_window_matches_pull() {
        let (a, da) = solve_transfer_invite_fixed_point(150.0, 140, 160).unwrap();
        let (b, db) = solve_pull_fixed_point(150.0, 140, Threshold::Finite(160)).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
    }

    #[test]
    fn transfer_invite_hybrid_below_l() {
        let (d, diag) = solve_transfer_invite_fixed_point(2.0, 5, 8).unwrap();
        assert_eq!(diag.regime, Regime::Hybrid);
        assert!((d.mean() - 2.0).abs() < 1e-8);
        let scheme = SchemeConfig::TransferToInvite { l: 5, h: 8 };
        assert!(fixed_point_residual(&scheme, &d, 2.0).unwrap() < 1e-8);
    }

    #[test]
    fn hybrid_mean_grows_from_zero_past_rho() {
        let (rho, l, h) = (2.0, 5usize, 8usize);
        let mean = |s: f64| {
            FlowDistribution::from_log_weights(0, &hybrid_log_weights(s, rho, l, h))
                .unwrap()
                .mean()
        };
        assert!(mean(1e-9) < 1e-8);
        assert!(mean(1e3) > rho);
        assert!(mean(1e6) <= h as f64);
        let grid: Vec<f64> = (1..=100).map(|k| mean(k as f64 * 0.2)).collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn i_star_example() {
        assert_eq!(least_loaded_i_star(3.5, 4), 3);
        assert!(matches!(
            solve_least_loaded_fixed_point(1.0, 2),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn least_loaded_saturated_is_two_point() {
        let d = solve_least_loaded_fixed_point(150.5, 140).unwrap();
        assert_eq!((d.prob(150), d.prob(151)), (0.5, 0.5));
    }

    #[test]
    fn least_loaded_support_and_mean() {
        let d = solve_least_loaded_fixed_point(150.0, 160).unwrap();
        let i_star = least_loaded_i_star(150.0, 160);
        assert_eq!(d.support(), (i_star, 160));
        assert!((d.mean() - 150.0).abs() < 1e-8);
    }

    #[test]
    fn residuals_vanish_at_closed_forms() {
        let cases: Vec<(SchemeConfig, f64)> = vec![
            (SchemeConfig::random(), 3.0),
            (SchemeConfig::jsq(), 150.5),
            (
                SchemeConfig::PullBased {
                    l: 140,
                    h: Threshold::Finite(160),
                },
                150.0,
            ),
            (
                SchemeConfig::PullBased {
                    l: 140,
                    h: Threshold::Finite(160),
                },
                130.0,
            ),
            (
                SchemeConfig::PullBased {
                    l: 140,
                    h: Threshold::Finite(160),
                },
                170.0,
            ),
            (
                SchemeConfig::PullBased {
                    l: 4,
                    h: Threshold::Infinite,
                },
                6.0,
            ),
            (
                SchemeConfig::Shedding {
                    h: Threshold::Finite(160),
                },
                150.0,
            ),
            (SchemeConfig::TransferToInvite { l: 140, h: 160 }, 150.0),
            (SchemeConfig::TransferToInvite { l: 140, h: 160 }, 141.0),
            (SchemeConfig::TransferToInvite { l: 140, h: 160 }, 145.0),
            (SchemeConfig::TransferToInvite { l: 140, h: 160 }, 130.0),
            (SchemeConfig::TransferToInvite { l: 140, h: 160 }, 175.0),
            (SchemeConfig::TransferToInvite { l: 2, h: 8 }, 2.5),
            (SchemeConfig::TransferToInvite { l: 3, h: 5 }, 3.0),
            (SchemeConfig::TransferToLeastLoaded { h: 160 }, 150.0),
            (SchemeConfig::TransferToLeastLoaded { h: 4 }, 3.5),
            (SchemeConfig::TransferToLeastLoaded { h: 140 }, 150.5),
        ];
        for (scheme, rho) in cases {
            let fp = solve_fixed_point(&scheme, rho).unwrap();
            let r = fixed_point_residual(&scheme, &fp.dist, rho).unwrap();
            assert!(r < 1e-8, "{scheme} at rho = {rho}: residual {r}");
            // shedding carries only the admitted load ρ(1 − ε)
            let carried = match scheme {
                SchemeConfig::Shedding {
                    h: Threshold::Finite(h),
                } => rho * (1.0 - crate::metrics::shedding_violation(h, rho)),
                _ => rho,
            };
            assert!(
                (fp.dist.mean() - carried).abs() < 1e-8,
                "{scheme} at rho = {rho}"
            );
        }
    }

    #[test]
    fn shedding_residual_vanishes() {
        let d = shedding_fixed_point(150.0, Threshold::Finite(160)).unwrap();
        let s = SchemeConfig::Shedding {
            h: Threshold::Finite(160),
        };
        assert!(fixed_point_residual(&s, &d, 150.0).unwrap() < 1e-10);
        // Truncated Poisson check against the log-space oracle.
        let f160 = (poisson::ln_pmf(160, 150.0) - poisson::ln_cdf(160, 150.0)).exp();
        assert!((d.prob(160) - f160).abs() < 1e-14);
    }

    #[test]
    fn carried_traffic_is_monotone_and_straddles() {
        for &(rho, l, h) in &[
            (150.0, 140u32, 160u32),
            (130.0, 140, 160),
            (175.0, 140, 160),
        ] {
            let (_, diag) = solve_pull_fixed_point(rho, l, Threshold::Finite(h)).unwrap();
            let (lo, hi) = initial_bracket(rho, l, Threshold::Finite(h));
            let (base, top) = match diag.regime {
                Regime::ErlangLoss => (0, Some(l as usize)),
                Regime::Saturated => (h as usize, None),
                _ => (l as usize, Some(h as usize)),
            };
            let carried = |s: f64| {
                FlowDistribution::from_log_weights(base, &window_log_weights(s, base, top))
                    .unwrap()
                    .mean()
            };
            let grid: Vec<f64> = (0..100)
                .map(|k| carried(lo + (hi - lo) * (k as f64 + 0.5) / 100.0))
                .collect();
            assert!(grid.windows(2).all(|w| w[1] >= w[0]));
            assert!(carried(lo.max(1e-12)) <= rho && carried(diag.sigma * 4.0 + 10.0) >= rho);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pull_solutions_have_mean_rho(rho in 0.5f64..60.0, l in 0u32..40, width in 1u32..30) {
            let h = Threshold::Finite(l + width);
            let (d, diag) = solve_pull_fixed_point(rho, l, h).unwrap();
            prop_assert!(diag.residual <= SIGMA_RESIDUAL_TOL);
            prop_assert!((d.mean() - rho).abs() < 1e-8);
            let scheme = SchemeConfig::PullBased { l, h };
            prop_assert!(fixed_point_residual(&scheme, &d, rho).unwrap() < 1e-8);
        }

        #[test]
        fn transfer_invite_solutions_are_fixed_points(rho in 0.5f64..60.0, l in 1u32..40, width in 1u32..30) {
            let h = l + width;
            let (d, _) = solve_transfer_invite_fixed_point(rho, l, h).unwrap();
            prop_assert!((d.mean() - rho).abs() < 1e-8);
            let scheme = SchemeConfig::TransferToInvite { l, h };
            let r = fixed_point_residual(&scheme, &d, rho).unwrap();
            prop_assert!(r < 1e-8, "residual {}", r);
        }

        #[test]
        fn least_loaded_solutions_are_fixed_points(rho in 2.0f64..60.0, extra in 1u32..30) {
            let h = rho.ceil() as u32 + extra;
            match solve_least_loaded_fixed_point(rho, h) {
                Ok(d) => {
                    prop_assert!((d.mean() - rho).abs() < 1e-8);
                    let scheme = SchemeConfig::TransferToLeastLoaded { h };
                    prop_assert!(fixed_point_residual(&scheme, &d, rho).unwrap() < 1e-8);
                }
                Err(Error::Unsupported(_)) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }

        #[test]
        fn pod_bound_is_monotone(rho in 0.1f64..200.0, d in 1u32..6, i in 0usize..300) {
            let a = pod_upper_bound(rho, d, i);
            let b = pod_upper_bound(rho, d, i + 1);
            prop_assert!((0.0..=1.0).contains(&a) && b <= a);
        }
    }
}
