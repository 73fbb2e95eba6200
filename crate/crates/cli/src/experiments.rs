//! The experiment catalog.
//!
//! Each experiment reads its parameters up front, rejects unknown keys, then
//! computes. Simulation sweeps fan out over rayon workers, but every point
//! has its own seed and results are collected in input order, so the CSV
//! output does not depend on scheduling.

use rayon::prelude::*;
use serde::Serialize;

use stickysim_core::bin_sim::run_bin_sim;
use stickysim_core::flow_sim::{
    empirical_vs_theory, run_flow_sim, ReallocPolicy, SimConfig, SimStats, TransferMode,
};
use stickysim_core::mean_field::{
    default_dt, fixed_point_residual, integrate_ode, pod_upper_bound, solve_fixed_point,
    MeanFieldState,
};
use stickysim_core::metrics::{
    g_tilde, g_tilde_flow_jsq, g_tilde_pkt_random, shedding_tail, shedding_violation,
    tradeoff_curve, ChiDelay, TradeoffPoint,
};
use stickysim_core::{Choices, FlowDistribution, SchemeConfig, SystemParams, Threshold};

use crate::error::{CliError, Result};
use crate::output::Artifacts;
use crate::params::Params;

/// State handed to an experiment body.
pub struct Context {
    pub params: Params,
    pub seed: u64,
    pub out: Artifacts,
}

pub struct Experiment {
    pub name: &'static str,
    /// Scheme families exercised, used by `list --scheme`.
    pub schemes: &'static [&'static str],
    pub about: &'static str,
    run: fn(&mut Context) -> Result<()>,
}

impl Experiment {
    pub fn run(&self, ctx: &mut Context) -> Result<()> {
        (self.run)(ctx)
    }
}

pub const CATALOG: &[Experiment] = &[
    Experiment {
        name: "fig-perfect-jsq",
        schemes: &["jsq"],
        about: "flow-level JSQ: occupancy trace and distribution vs the two-point fixed point",
        run: fig_perfect_jsq,
    },
    Experiment {
        name: "fig-power-of-two",
        schemes: &["power-of-d"],
        about: "flow-level power-of-d: trace, distribution vs ODE, tail vs the analytic bound",
        run: fig_power_of_two,
    },
    Experiment {
        name: "fig-pull-random",
        schemes: &["pull"],
        about: "pull-based with l=0, h=inf (random assignment) vs Poisson",
        run: fig_pull_random,
    },
    Experiment {
        name: "fig-pull-tight",
        schemes: &["pull"],
        about: "pull-based with l=floor(rho), h=l+1",
        run: fig_pull_tight,
    },
    Experiment {
        name: "fig-pull-wide",
        schemes: &["pull"],
        about: "pull-based with l=floor(rho)-10, h=floor(rho)+10",
        run: fig_pull_wide,
    },
    Experiment {
        name: "fig-delay-tail",
        schemes: &["jsq", "power-of-d", "pull"],
        about:
            "packet chi-delay tail vs chi for the strictly sticky schemes and packet-level random",
        run: fig_delay_tail,
    },
    Experiment {
        name: "fig-shedding",
        schemes: &["shedding"],
        about: "flow shedding at h: trace and distribution vs truncated Poisson",
        run: fig_shedding,
    },
    Experiment {
        name: "fig-transfer-invite",
        schemes: &["transfer-invite"],
        about: "transfer-to-invite overflow: trace and distribution vs fixed point",
        run: fig_transfer_invite,
    },
    Experiment {
        name: "fig-transfer-least-loaded",
        schemes: &["least-loaded"],
        about: "transfer-to-least-loaded overflow: trace and distribution vs fixed point",
        run: fig_transfer_least_loaded,
    },
    Experiment {
        name: "violation-curves",
        schemes: &["shedding", "transfer-invite", "least-loaded"],
        about: "simulated vs theoretical violation probability over an h sweep",
        run: violation_curves,
    },
    Experiment {
        name: "tradeoff-shedding",
        schemes: &["shedding"],
        about: "violation vs delay-tail improvement for shedding (closed form)",
        run: tradeoff_shedding,
    },
    Experiment {
        name: "tradeoff-transfer-invite",
        schemes: &["transfer-invite"],
        about: "violation vs delay-tail improvement for transfer-to-invite (fixed point)",
        run: tradeoff_transfer_invite,
    },
    Experiment {
        name: "tradeoff-least-loaded",
        schemes: &["least-loaded"],
        about: "violation vs delay-tail improvement for transfer-to-least-loaded (fixed point)",
        run: tradeoff_least_loaded,
    },
    Experiment {
        name: "tradeoff-compare",
        schemes: &["shedding", "transfer-invite", "least-loaded"],
        about: "the three violating schemes on one trade-off chart",
        run: tradeoff_compare,
    },
    Experiment {
        name: "bin-variation",
        schemes: &["bin"],
        about: "bin-based scheme: tracked-server trace and distribution",
        run: bin_variation,
    },
    Experiment {
        name: "bin-violation",
        schemes: &["bin"],
        about: "bin-based violation probability over h for several bin counts",
        run: bin_violation,
    },
    Experiment {
        name: "bin-tradeoff",
        schemes: &["bin"],
        about: "bin-based violation vs delay-tail improvement for several bin counts",
        run: bin_tradeoff,
    },
    Experiment {
        name: "bound-check",
        schemes: &["power-of-d"],
        about: "power-of-d ODE terminal tail vs the analytic upper bound",
        run: bound_check,
    },
    Experiment {
        name: "fixed-points",
        schemes: &["jsq", "pull", "shedding", "transfer-invite", "least-loaded"],
        about: "analytic fixed points of every solvable scheme with residuals",
        run: fixed_points,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    CATALOG.iter().find(|e| e.name == name)
}

/// Catalog entries, optionally restricted to one scheme family.
pub fn list(scheme: Option<&str>) -> Vec<&'static Experiment> {
    CATALOG
        .iter()
        .filter(|e| scheme.is_none_or(|s| e.schemes.contains(&s)))
        .collect()
}

#[derive(Serialize)]
struct HistRow {
    i: usize,
    p_empirical: f64,
    p_theory: f64,
}

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    occupancy: u32,
}

#[derive(Serialize)]
struct PmfRow {
    i: usize,
    p: f64,
}

struct SimSetup {
    params: SystemParams,
    warmup: f64,
    horizon: f64,
    sample: f64,
    tracked: usize,
}

impl SimSetup {
    /// Window lengths are read in units of β.
    fn read(p: &mut Params) -> Result<Self> {
        let params = p.system()?;
        let warmup = p.f64("warmup", 50.0)? * params.beta;
        let horizon = p.f64("horizon", 200.0)? * params.beta;
        let sample = p.f64("sample", 0.1)? * params.beta;
        let tracked = p.usize("tracked", 0)?;
        Ok(SimSetup {
            params,
            warmup,
            horizon,
            sample,
            tracked,
        })
    }

    fn config(&self, scheme: SchemeConfig, seed: u64) -> SimConfig {
        let mut c =
            SimConfig::new(self.params, scheme, seed).with_window(self.warmup, self.horizon);
        c.sample_interval = self.sample;
        c.tracked_server = self.tracked;
        c
    }
}

fn transfer_mode(p: &mut Params) -> Result<TransferMode> {
    match p.string("transfer", "arriving").as_str() {
        "arriving" => Ok(TransferMode::Arriving),
        "resident" => Ok(TransferMode::Resident),
        other => Err(CliError::invalid(format!(
            "parameter `transfer`: unknown mode `{other}`"
        ))),
    }
}

fn realloc_policy(p: &mut Params) -> Result<ReallocPolicy> {
    match p.string("policy", "per-arrival").as_str() {
        "per-arrival" => Ok(ReallocPolicy::OnePerArrivalAbove),
        "per-crossing" => Ok(ReallocPolicy::OnePerCrossing),
        "while-above" => Ok(ReallocPolicy::WhileAbove),
        other => Err(CliError::invalid(format!(
            "parameter `policy`: unknown policy `{other}`"
        ))),
    }
}

fn k_star(params: &SystemParams) -> u32 {
    params.rho().floor() as u32
}

fn write_histogram(
    out: &mut Artifacts,
    name: &str,
    empirical: &[f64],
    theory: &FlowDistribution,
) -> Result<()> {
    let len = empirical.len().max(theory.probs().len());
    out.csv(
        name,
        (0..len).map(|i| HistRow {
            i,
            p_empirical: empirical.get(i).copied().unwrap_or(0.0),
            p_theory: theory.prob(i),
        }),
    )
}

fn write_series(out: &mut Artifacts, stats: &SimStats) -> Result<()> {
    out.csv(
        "series.csv",
        stats
            .series
            .iter()
            .map(|&(t, occupancy)| SeriesRow { t, occupancy }),
    )
}

fn record_sim(out: &mut Artifacts, stats: &SimStats, theory: &FlowDistribution) -> Result<()> {
    write_series(out, stats)?;
    write_histogram(out, "histogram.csv", &stats.occupancy_hist, theory)?;
    out.tv_distances
        .insert("histogram".into(), empirical_vs_theory(stats, theory));
    out.metrics.insert("mean_occupancy".into(), stats.mean_occ);
    out.metrics.insert("theory_mean".into(), theory.mean());
    out.metrics.insert("flows".into(), stats.total_flows as f64);
    out.metrics
        .insert("violation_rate".into(), stats.violation_rate());
    out.metrics.insert("events".into(), stats.events as f64);
    Ok(())
}

/// Flow simulation compared against the analytic fixed point.
fn flow_figure(
    ctx: &mut Context,
    scheme: impl FnOnce(&mut Params, &SystemParams) -> Result<SchemeConfig>,
) -> Result<()> {
    let setup = SimSetup::read(&mut ctx.params)?;
    let scheme = scheme(&mut ctx.params, &setup.params)?;
    let mut config = setup.config(scheme, ctx.seed);
    if matches!(
        scheme,
        SchemeConfig::TransferToInvite { .. } | SchemeConfig::TransferToLeastLoaded { .. }
    ) {
        config.transfer_mode = transfer_mode(&mut ctx.params)?;
    }
    ctx.params.finish()?;
    let rho = setup.params.rho();
    let fp = solve_fixed_point(&scheme, rho)?;
    ctx.out.residuals.insert(
        "fixed_point".into(),
        fixed_point_residual(&scheme, &fp.dist, rho)?,
    );
    if let Some(d) = fp.diagnostics {
        ctx.out
            .notes
            .insert("regime".into(), format!("{:?}", d.regime));
    }
    ctx.out.notes.insert("scheme".into(), scheme.to_string());
    let stats = run_flow_sim(&config)?;
    record_sim(&mut ctx.out, &stats, &fp.dist)?;
    let window = stats
        .occupancy_hist
        .get(k_star(&setup.params) as usize..)
        .unwrap_or(&[]);
    ctx.out.metrics.insert(
        "mass_k_star_pair".into(),
        window.iter().take(2).sum::<f64>(),
    );
    Ok(())
}

fn fig_perfect_jsq(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |_, _| Ok(SchemeConfig::jsq()))
}

fn fig_pull_random(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |p, _| {
        Ok(SchemeConfig::PullBased {
            l: p.u32("l", 0)?,
            h: p.threshold("h", Threshold::Infinite)?,
        })
    })
}

fn fig_pull_tight(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |p, sys| {
        let k = k_star(sys);
        Ok(SchemeConfig::PullBased {
            l: p.u32("l", k)?,
            h: p.threshold("h", Threshold::Finite(k + 1))?,
        })
    })
}

fn fig_pull_wide(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |p, sys| {
        let k = k_star(sys);
        Ok(SchemeConfig::PullBased {
            l: p.u32("l", k.saturating_sub(10))?,
            h: p.threshold("h", Threshold::Finite(k + 10))?,
        })
    })
}

fn fig_shedding(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |p, _| {
        Ok(SchemeConfig::Shedding {
            h: p.threshold("h", Threshold::Finite(160))?,
        })
    })
}

fn fig_transfer_invite(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |p, _| {
        Ok(SchemeConfig::TransferToInvite {
            l: p.u32("l", 140)?,
            h: p.u32("h", 160)?,
        })
    })
}

fn fig_transfer_least_loaded(ctx: &mut Context) -> Result<()> {
    flow_figure(ctx, |p, _| {
        Ok(SchemeConfig::TransferToLeastLoaded {
            h: p.u32("h", 160)?,
        })
    })
}

/// Terminal ODE state for power-of-d started from the empty system.
fn power_of_d_ode(params: &SystemParams, d: u32, betas: f64) -> Result<MeanFieldState> {
    let scheme = SchemeConfig::PowerOfD {
        d: Choices::Sample(d),
    };
    let traj = integrate_ode(
        &scheme,
        params,
        &MeanFieldState::empty(1),
        betas * params.beta,
        default_dt(params),
    )?;
    Ok(traj.final_state)
}

#[derive(Serialize)]
struct BoundRow {
    i: usize,
    s_empirical: f64,
    s_ode: f64,
    s_bound: f64,
}

fn fig_power_of_two(ctx: &mut Context) -> Result<()> {
    let setup = SimSetup::read(&mut ctx.params)?;
    let d = ctx.params.u32("d", 2)?;
    let ode_betas = ctx.params.f64("ode_time", 40.0)?;
    ctx.params.finish()?;
    if d < 2 {
        return Err(CliError::invalid("parameter `d` must be at least 2"));
    }
    let rho = setup.params.rho();
    let ode = power_of_d_ode(&setup.params, d, ode_betas)?;
    let theory = ode.to_distribution()?;
    let stats = run_flow_sim(&setup.config(
        SchemeConfig::PowerOfD {
            d: Choices::Sample(d),
        },
        ctx.seed,
    ))?;
    record_sim(&mut ctx.out, &stats, &theory)?;

    let emp = stats.distribution()?.tail();
    let len = emp.len().max(ode.len());
    let rows: Vec<BoundRow> = (0..len)
        .map(|i| BoundRow {
            i,
            s_empirical: emp.get(i).copied().unwrap_or(0.0),
            s_ode: ode.s(i),
            s_bound: pod_upper_bound(rho, d, i),
        })
        .collect();
    let excess = rows
        .iter()
        .map(|r| r.s_ode - r.s_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    ctx.out
        .metrics
        .insert("ode_max_bound_excess".into(), excess);
    ctx.out.csv("tail_bound.csv", rows)?;
    Ok(())
}

#[derive(Serialize)]
struct DelayRow {
    chi: f64,
    scheme: &'static str,
    g_tilde: f64,
}

fn fig_delay_tail(ctx: &mut Context) -> Result<()> {
    let params = ctx.params.system()?;
    let chis = ctx.params.f64_list("chis", "0..=300:5")?;
    let d = ctx.params.u32("d", 2)?;
    let ode_betas = ctx.params.f64("ode_time", 40.0)?;
    ctx.params.finish()?;
    let rho = params.rho();
    let k = k_star(&params);
    let tight = SchemeConfig::PullBased {
        l: k,
        h: Threshold::Finite(k + 1),
    };
    let wide = SchemeConfig::PullBased {
        l: k.saturating_sub(10),
        h: Threshold::Finite(k + 10),
    };
    let tight_fp = solve_fixed_point(&tight, rho)?.dist;
    let wide_fp = solve_fixed_point(&wide, rho)?.dist;
    let pod = power_of_d_ode(&params, d, ode_betas)?.to_distribution()?;

    let mut rows = Vec::new();
    for &chi in &chis {
        let g = ChiDelay { chi, params };
        rows.push(DelayRow {
            chi,
            scheme: "flow-jsq",
            g_tilde: g_tilde_flow_jsq(chi, &params),
        });
        rows.push(DelayRow {
            chi,
            scheme: "power-of-d",
            g_tilde: g_tilde(&pod, &g)?,
        });
        rows.push(DelayRow {
            chi,
            scheme: "pull-tight",
            g_tilde: g_tilde(&tight_fp, &g)?,
        });
        rows.push(DelayRow {
            chi,
            scheme: "pull-wide",
            g_tilde: g_tilde(&wide_fp, &g)?,
        });
        rows.push(DelayRow {
            chi,
            scheme: "flow-random",
            g_tilde: shedding_tail(Threshold::Infinite, chi, &params)?,
        });
        rows.push(DelayRow {
            chi,
            scheme: "packet-random",
            g_tilde: g_tilde_pkt_random(chi, &params)?,
        });
    }
    ctx.out.csv("delay_tail.csv", rows)?;
    Ok(())
}

#[derive(Serialize)]
struct ViolationRow {
    scheme: &'static str,
    h: u32,
    horizon: f64,
    flows: u64,
    violations: u64,
    eps_empirical: f64,
    eps_theory: f64,
    rel_err: f64,
}

/// Runs `config`, doubling the measurement window until at least
/// `min_violations` are observed or `max_doublings` is exhausted.
/// Returns the stats and the window length used.
fn run_until_violations(
    mut config: SimConfig,
    min_violations: u64,
    max_doublings: u32,
) -> Result<(SimStats, f64)> {
    let mut stats = run_flow_sim(&config)?;
    for _ in 0..max_doublings {
        if stats.violations >= min_violations {
            break;
        }
        config.horizon *= 2.0;
        stats = run_flow_sim(&config)?;
    }
    Ok((stats, config.horizon))
}

/// Stationary violation probability: the blocking probability for
/// shedding, the mass at `h` for the transfer schemes.
pub fn theoretical_violation(scheme: &SchemeConfig, rho: f64) -> Result<f64> {
    match *scheme {
        SchemeConfig::Shedding {
            h: Threshold::Finite(h),
        } => Ok(shedding_violation(h, rho)),
        SchemeConfig::TransferToInvite { h, .. } | SchemeConfig::TransferToLeastLoaded { h } => {
            Ok(solve_fixed_point(scheme, rho)?.dist.prob(h as usize))
        }
        _ => Err(CliError::invalid(format!(
            "no violation probability for {scheme}"
        ))),
    }
}

fn violation_curves(ctx: &mut Context) -> Result<()> {
    let setup = SimSetup::read(&mut ctx.params)?;
    let hs = ctx.params.u32_list("hs", "152,156,160,165")?;
    let l = ctx.params.u32("l", 140)?;
    let min_violations = ctx.params.u64("min_violations", 50)?;
    let max_doublings = ctx.params.u32("max_doublings", 4)?;
    ctx.params.finish()?;
    let rho = setup.params.rho();
    let mut points = Vec::new();
    points.extend(hs.iter().map(|&h| {
        (
            "shedding",
            SchemeConfig::Shedding {
                h: Threshold::Finite(h),
            },
        )
    }));
    points.extend(
        hs.iter()
            .map(|&h| ("transfer-invite", SchemeConfig::TransferToInvite { l, h })),
    );
    points.extend(
        hs.iter()
            .map(|&h| ("least-loaded", SchemeConfig::TransferToLeastLoaded { h })),
    );
    let seed = ctx.seed;
    let rows = points
        .par_iter()
        .map(|&(name, scheme)| {
            let h = match scheme {
                SchemeConfig::Shedding {
                    h: Threshold::Finite(h),
                }
                | SchemeConfig::TransferToInvite { h, .. }
                | SchemeConfig::TransferToLeastLoaded { h } => h,
                _ => unreachable!("sweep holds only violating schemes"),
            };
            let eps_theory = theoretical_violation(&scheme, rho)?;
            let (stats, horizon) =
                run_until_violations(setup.config(scheme, seed), min_violations, max_doublings)?;
            let eps = stats.violation_rate();
            Ok(ViolationRow {
                scheme: name,
                h,
                horizon: horizon / setup.params.beta,
                flows: stats.total_flows,
                violations: stats.violations,
                eps_empirical: eps,
                eps_theory,
                rel_err: (eps - eps_theory).abs() / eps_theory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    ctx.out.metrics.insert("max_rel_err".into(), worst);
    ctx.out
        .tolerances
        .insert("min_violations".into(), min_violations as f64);
    ctx.out.csv("violation.csv", rows)?;
    Ok(())
}

#[derive(Serialize)]
struct TradeoffRow {
    h: u32,
    epsilon: f64,
    g_chi: f64,
    improvement: f64,
}

impl From<TradeoffPoint> for TradeoffRow {
    fn from(p: TradeoffPoint) -> Self {
        TradeoffRow {
            h: p.h,
            epsilon: p.epsilon,
            g_chi: p.g_chi,
            improvement: p.improvement,
        }
    }
}

/// Trade-off points of a fixed-point scheme over `hs`, relative to the
/// strictly sticky random assignment (Poisson) baseline.
pub fn fixed_point_tradeoff(
    hs: &[u32],
    chi: f64,
    params: &SystemParams,
    scheme: impl Fn(u32) -> SchemeConfig + Sync,
) -> Result<Vec<TradeoffPoint>> {
    let baseline = shedding_tail(Threshold::Infinite, chi, params)?;
    let g = ChiDelay {
        chi,
        params: *params,
    };
    hs.par_iter()
        .map(|&h| {
            let s = scheme(h);
            let dist = solve_fixed_point(&s, params.rho())?.dist;
            let eps = theoretical_violation(&s, params.rho())?;
            Ok(TradeoffPoint::new(h, eps, g_tilde(&dist, &g)?, baseline))
        })
        .collect()
}

fn tradeoff_inputs(p: &mut Params, chi_default: f64) -> Result<(SystemParams, f64, Vec<u32>)> {
    let params = p.system()?;
    let chi = p.f64("chi", chi_default)?;
    let hs = p.u32_list("hs", "151..=230")?;
    Ok((params, chi, hs))
}

fn tradeoff_shedding(ctx: &mut Context) -> Result<()> {
    let (params, chi, hs) = tradeoff_inputs(&mut ctx.params, 200.0)?;
    ctx.params.finish()?;
    let curve = tradeoff_curve(&hs, chi, &params)?;
    ctx.out
        .csv("tradeoff.csv", curve.into_iter().map(TradeoffRow::from))
}

fn tradeoff_transfer_invite(ctx: &mut Context) -> Result<()> {
    let (params, chi, hs) = tradeoff_inputs(&mut ctx.params, 200.0)?;
    let l = ctx.params.u32("l", 140)?;
    ctx.params.finish()?;
    let curve = fixed_point_tradeoff(&hs, chi, &params, |h| SchemeConfig::TransferToInvite {
        l,
        h,
    })?;
    ctx.out
        .csv("tradeoff.csv", curve.into_iter().map(TradeoffRow::from))
}

fn tradeoff_least_loaded(ctx: &mut Context) -> Result<()> {
    let (params, chi, hs) = tradeoff_inputs(&mut ctx.params, 200.0)?;
    ctx.params.finish()?;
    let curve = fixed_point_tradeoff(&hs, chi, &params, |h| SchemeConfig::TransferToLeastLoaded {
        h,
    })?;
    ctx.out
        .csv("tradeoff.csv", curve.into_iter().map(TradeoffRow::from))
}

#[derive(Serialize)]
struct CompareRow {
    scheme: &'static str,
    h: u32,
    epsilon: f64,
    g_chi: f64,
    improvement: f64,
}

fn tradeoff_compare(ctx: &mut Context) -> Result<()> {
    let (params, chi, hs) = tradeoff_inputs(&mut ctx.params, 100.0)?;
    let l = ctx.params.u32("l", 140)?;
    ctx.params.finish()?;
    let curves = [
        ("shedding", tradeoff_curve(&hs, chi, &params)?),
        (
            "transfer-invite",
            fixed_point_tradeoff(&hs, chi, &params, |h| SchemeConfig::TransferToInvite {
                l,
                h,
            })?,
        ),
        (
            "least-loaded",
            fixed_point_tradeoff(&hs, chi, &params, |h| SchemeConfig::TransferToLeastLoaded {
                h,
            })?,
        ),
    ];
    let rows = curves.into_iter().flat_map(|(scheme, curve)| {
        curve.into_iter().map(move |p| CompareRow {
            scheme,
            h: p.h,
            epsilon: p.epsilon,
            g_chi: p.g_chi,
            improvement: p.improvement,
        })
    });
    ctx.out.csv("tradeoff.csv", rows.collect::<Vec<_>>())
}

fn bin_variation(ctx: &mut Context) -> Result<()> {
    let setup = SimSetup::read(&mut ctx.params)?;
    let m = ctx.params.bins_list("bins", "10n", setup.params.n)?;
    let l = ctx.params.u32("l", 140)?;
    let h = ctx.params.u32("h", 160)?;
    let policy = realloc_policy(&mut ctx.params)?;
    ctx.params.finish()?;
    let [m] = m[..] else {
        return Err(CliError::invalid(
            "parameter `bins` takes a single value here",
        ));
    };
    let mut config = setup.config(
        SchemeConfig::BinBased {
            m,
            l,
            h: Threshold::Finite(h),
        },
        ctx.seed,
    );
    config.realloc_policy = policy;
    let theory =
        solve_fixed_point(&SchemeConfig::TransferToInvite { l, h }, setup.params.rho())?.dist;
    let run = run_bin_sim(&config)?;
    record_sim(&mut ctx.out, &run.stats, &theory)?;
    write_histogram(
        &mut ctx.out,
        "tracked_histogram.csv",
        &run.stats.tracked_hist,
        &theory,
    )?;
    ctx.out.metrics.insert(
        "tracked_fraction_at_most_h".into(),
        run.stats.tracked_fraction_at_most(h as usize),
    );
    ctx.out
        .metrics
        .insert("violation_rate".into(), run.violation_rate());
    ctx.out
        .metrics
        .insert("reallocations".into(), run.reallocations as f64);
    Ok(())
}

/// Outcome of the bin-based scheme at one (m, h), pooled over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct BinPoint {
    pub m: usize,
    pub h: u32,
    pub seeds: u64,
    pub flows: u64,
    pub violated_flows: u64,
    pub reallocations: u64,
    pub epsilon: f64,
    pub moves_per_flow: f64,
    pub g_chi: f64,
    pub improvement: f64,
    pub tv_theory: f64,
}

struct BinSweep {
    setup: SimSetup,
    bins: Vec<usize>,
    hs: Vec<u32>,
    l: u32,
    chi: f64,
    seeds: u64,
    policy: ReallocPolicy,
}

impl BinSweep {
    fn read(p: &mut Params, hs_default: &str) -> Result<Self> {
        let setup = SimSetup::read(p)?;
        let bins = p.bins_list("bins", "2n,5n,10n,20n", setup.params.n)?;
        let hs = p.u32_list("hs", hs_default)?;
        let l = p.u32("l", 140)?;
        let chi = p.f64("chi", 200.0)?;
        let seeds = p.u64("seeds", 1)?;
        let policy = realloc_policy(p)?;
        p.finish()?;
        if seeds == 0 {
            return Err(CliError::invalid("parameter `seeds` must be positive"));
        }
        Ok(BinSweep {
            setup,
            bins,
            hs,
            l,
            chi,
            seeds,
            policy,
        })
    }

    fn run(&self, seed: u64) -> Result<Vec<BinPoint>> {
        let params = self.setup.params;
        let baseline = shedding_tail(Threshold::Infinite, self.chi, &params)?;
        let g = ChiDelay {
            chi: self.chi,
            params,
        };
        let grid: Vec<(usize, u32)> = self
            .bins
            .iter()
            .flat_map(|&m| self.hs.iter().map(move |&h| (m, h)))
            .collect();
        grid.par_iter()
            .map(|&(m, h)| {
                let theory = solve_fixed_point(
                    &SchemeConfig::TransferToInvite { l: self.l, h },
                    params.rho(),
                )?
                .dist;
                let mut pooled: Vec<f64> = Vec::new();
                let (mut flows, mut violated, mut moves, mut realloc) = (0, 0, 0, 0);
                for r in 0..self.seeds {
                    let scheme = SchemeConfig::BinBased {
                        m,
                        l: self.l,
                        h: Threshold::Finite(h),
                    };
                    let mut config = self.setup.config(scheme, seed.wrapping_add(r));
                    config.realloc_policy = self.policy;
                    let run = run_bin_sim(&config)?;
                    flows += run.stats.total_flows;
                    violated += run.violated_flows();
                    moves += run.stats.transfers;
                    realloc += run.reallocations;
                    let hist = &run.stats.occupancy_hist;
                    if pooled.len() < hist.len() {
                        pooled.resize(hist.len(), 0.0);
                    }
                    pooled
                        .iter_mut()
                        .zip(hist)
                        .for_each(|(a, b)| *a += b / self.seeds as f64);
                }
                let dist = FlowDistribution::from_weights(pooled)?;
                let g_chi = g_tilde(&dist, &g)?;
                Ok(BinPoint {
                    m,
                    h,
                    seeds: self.seeds,
                    flows,
                    violated_flows: violated,
                    reallocations: realloc,
                    epsilon: violated as f64 / flows as f64,
                    moves_per_flow: moves as f64 / flows as f64,
                    g_chi,
                    improvement: baseline / g_chi,
                    tv_theory: dist.total_variation(&theory),
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct BinViolationRow {
    m: usize,
    h: u32,
    seeds: u64,
    flows: u64,
    violated_flows: u64,
    reallocations: u64,
    epsilon: f64,
    moves_per_flow: f64,
    tv_theory: f64,
}

fn bin_violation(ctx: &mut Context) -> Result<()> {
    let sweep = BinSweep::read(&mut ctx.params, "160..=200:5")?;
    let rows = sweep.run(ctx.seed)?.into_iter().map(|p| BinViolationRow {
        m: p.m,
        h: p.h,
        seeds: p.seeds,
        flows: p.flows,
        violated_flows: p.violated_flows,
        reallocations: p.reallocations,
        epsilon: p.epsilon,
        moves_per_flow: p.moves_per_flow,
        tv_theory: p.tv_theory,
    });
    ctx.out.csv("bin_violation.csv", rows.collect::<Vec<_>>())
}

#[derive(Serialize)]
struct BinTradeoffRow {
    m: usize,
    h: u32,
    epsilon: f64,
    moves_per_flow: f64,
    g_chi: f64,
    improvement: f64,
}

fn bin_tradeoff(ctx: &mut Context) -> Result<()> {
    let sweep = BinSweep::read(&mut ctx.params, "165..=205:5")?;
    let rows = sweep.run(ctx.seed)?.into_iter().map(|p| BinTradeoffRow {
        m: p.m,
        h: p.h,
        epsilon: p.epsilon,
        moves_per_flow: p.moves_per_flow,
        g_chi: p.g_chi,
        improvement: p.improvement,
    });
    ctx.out.csv("bin_tradeoff.csv", rows.collect::<Vec<_>>())
}

#[derive(Serialize)]
struct BoundCheckRow {
    rho: f64,
    i: usize,
    s_ode: f64,
    s_bound: f64,
    slack: f64,
}

fn bound_check(ctx: &mut Context) -> Result<()> {
    let base = ctx.params.system()?;
    let rhos = ctx.params.f64_list("rhos", "1.5,5.3,150")?;
    let d = ctx.params.u32("d", 2)?;
    let ode_betas = ctx.params.f64("ode_time", 30.0)?;
    let tol = ctx.params.f64("tol", 1e-6)?;
    ctx.params.finish()?;
    if d < 2 {
        return Err(CliError::invalid("parameter `d` must be at least 2"));
    }
    let mut rows = Vec::new();
    for &rho in &rhos {
        let params = base.with_rho(rho);
        let s = power_of_d_ode(&params, d, ode_betas)?;
        let k = rho.floor() as usize;
        let mut worst = f64::NEG_INFINITY;
        for i in k + 1..s.len() {
            let bound = pod_upper_bound(rho, d, i);
            worst = worst.max(s.s(i) - bound);
            rows.push(BoundCheckRow {
                rho,
                i,
                s_ode: s.s(i),
                s_bound: bound,
                slack: bound - s.s(i),
            });
        }
        ctx.out
            .metrics
            .insert(format!("max_excess_rho_{rho}"), worst);
        ctx.out
            .checks
            .insert(format!("bound_holds_rho_{rho}"), worst <= tol);
    }
    ctx.out.tolerances.insert("bound".into(), tol);
    ctx.out.csv("bound_check.csv", rows)
}

fn fixed_points(ctx: &mut Context) -> Result<()> {
    let rho = ctx.params.system()?.rho();
    let l = ctx.params.u32("l", 140)?;
    let h = ctx.params.u32("h", 160)?;
    ctx.params.finish()?;
    let schemes = [
        ("jsq", SchemeConfig::jsq()),
        ("random", SchemeConfig::random()),
        (
            "pull",
            SchemeConfig::PullBased {
                l,
                h: Threshold::Finite(h),
            },
        ),
        (
            "shedding",
            SchemeConfig::Shedding {
                h: Threshold::Finite(h),
            },
        ),
        ("transfer-invite", SchemeConfig::TransferToInvite { l, h }),
        ("least-loaded", SchemeConfig::TransferToLeastLoaded { h }),
    ];
    for (name, scheme) in schemes {
        let fp = solve_fixed_point(&scheme, rho)?;
        ctx.out
            .residuals
            .insert(name.into(), fixed_point_residual(&scheme, &fp.dist, rho)?);
        if let Some(d) = fp.diagnostics {
            ctx.out
                .notes
                .insert(format!("{name}_regime"), format!("{:?}", d.regime));
        }
        ctx.out
            .metrics
            .insert(format!("{name}_mean"), fp.dist.mean());
        ctx.out.csv(
            &format!("fixed_point_{name}.csv"),
            fp.dist
                .probs()
                .iter()
                .enumerate()
                .map(|(i, &p)| PmfRow { i, p }),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_are_unique_and_sorted_stably() {
        let mut names: Vec<_> = CATALOG.iter().map(|e| e.name).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn scheme_filter() {
        assert!(list(Some("bin")).iter().all(|e| e.name.starts_with("bin-")));
        assert_eq!(list(Some("bin")).len(), 3);
        assert!(list(Some("no-such-scheme")).is_empty());
        assert_eq!(list(None).len(), CATALOG.len());
    }

    #[test]
    fn violation_theory_per_scheme() {
        let shed = theoretical_violation(
            &SchemeConfig::Shedding {
                h: Threshold::Finite(160),
            },
            150.0,
        )
        .unwrap();
        assert!((shed - shedding_violation(160, 150.0)).abs() < 1e-15);
        let inv = theoretical_violation(&SchemeConfig::TransferToInvite { l: 140, h: 160 }, 150.0)
            .unwrap();
        assert!(inv > 0.0 && inv < 0.1);
        assert!(theoretical_violation(&SchemeConfig::jsq(), 150.0).is_err());
    }
}
