use stickysim_core::mean_field::{
    default_dt, integrate_ode, pod_upper_bound, solve_fixed_point, MeanFieldState,
};
use stickysim_core::{Choices, FlowDistribution, SchemeConfig, SystemParams, Threshold};

fn starts(rho: f64) -> Vec<MeanFieldState> {
    let hi = (3.0 * rho) as usize;
    vec![
        MeanFieldState::empty(1),
        MeanFieldState::from_distribution(&FlowDistribution::point_mass(hi)),
        MeanFieldState::from_distribution(&FlowDistribution::poisson(rho / 2.0, hi)),
    ]
}

fn converge(scheme: SchemeConfig, rho: f64, t_end_betas: f64, tol: f64) {
    let params = SystemParams::baseline().with_rho(rho);
    let fp = solve_fixed_point(&scheme, rho).unwrap().dist;
    for s0 in starts(rho) {
        let traj = integrate_ode(
            &scheme,
            &params,
            &s0,
            t_end_betas * params.beta,
            default_dt(&params),
        )
        .unwrap();
        let d = traj.final_state.to_distribution().unwrap();
        let tv = d.total_variation(&fp);
        assert!(tv <= tol, "{scheme} rho={rho}: tv {tv:e}");
    }
}

#[test]
fn pull_based_converges_in_window_regime() {
    converge(
        SchemeConfig::PullBased {
            l: 12,
            h: Threshold::Finite(20),
        },
        15.0,
        40.0,
        1e-6,
    );
}

#[test]
fn transfer_invite_converges_in_both_forms() {
    converge(
        SchemeConfig::TransferToInvite { l: 12, h: 20 },
        15.0,
        40.0,
        1e-6,
    );
    // ρ just above l: the fixed point keeps mass below l
    converge(
        SchemeConfig::TransferToInvite { l: 12, h: 20 },
        12.5,
        40.0,
        1e-6,
    );
    converge(
        SchemeConfig::TransferToInvite { l: 5, h: 8 },
        2.0,
        40.0,
        1e-6,
    );
}

#[test]
fn least_loaded_converges() {
    converge(
        SchemeConfig::TransferToLeastLoaded { h: 20 },
        15.0,
        40.0,
        1e-6,
    );
}

#[test]
fn random_converges_to_poisson() {
    converge(SchemeConfig::random(), 3.0, 30.0, 1e-6);
}

#[test]
fn power_of_two_below_bound() {
    for rho in [1.5, 5.3] {
        let params = SystemParams::baseline().with_rho(rho);
        let scheme = SchemeConfig::PowerOfD {
            d: Choices::Sample(2),
        };
        let traj = integrate_ode(
            &scheme,
            &params,
            &MeanFieldState::empty(1),
            30.0 * params.beta,
            default_dt(&params),
        )
        .unwrap();
        let k = rho.floor() as usize;
        for i in k + 1..traj.final_state.len() {
            assert!(traj.final_state.s(i) <= pod_upper_bound(rho, 2, i) + 1e-6);
        }
    }
}

#[test]
fn trajectory_mean_settles_at_rho() {
    let params = SystemParams::baseline().with_rho(15.0);
    let scheme = SchemeConfig::PullBased {
        l: 12,
        h: Threshold::Finite(20),
    };
    let traj = integrate_ode(
        &scheme,
        &params,
        &MeanFieldState::empty(1),
        20.0 * params.beta,
        default_dt(&params),
    )
    .unwrap();
    assert_eq!(traj.times.len(), traj.means.len());
    assert!((traj.means.last().unwrap() - 15.0).abs() < 1e-6);
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
}
