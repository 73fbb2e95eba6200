//! Per-arrival assignment rules of the flow-level schemes.

use rand::seq::index;
use rand::Rng;

use super::pool::ServerPool;
use crate::error::{Error, Result};
use crate::scheme::{Choices, SchemeConfig, Threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transfer {
    pub from: usize,
    pub to: usize,
}

/// Outcome of dispatching one arriving flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    /// Server that receives a flow; `None` if the flow is discarded.
    pub server: Option<usize>,
    /// Whether stickiness is broken (discard or transfer).
    pub violation: bool,
    pub transfer: Option<Transfer>,
}

impl Assignment {
    fn keep(server: usize) -> Self {
        Assignment {
            server: Some(server),
            violation: false,
            transfer: None,
        }
    }

    fn discard() -> Self {
        Assignment {
            server: None,
            violation: true,
            transfer: None,
        }
    }

    fn moved(from: usize, to: usize) -> Self {
        Assignment {
            server: Some(to),
            violation: true,
            transfer: Some(Transfer { from, to }),
        }
    }
}

/// Least loaded of `d` distinct uniformly sampled servers, ties uniform.
fn least_of_sample<R: Rng + ?Sized>(pool: &ServerPool, d: usize, rng: &mut R) -> usize {
    let n = pool.n();
    if d == 1 {
        return rng.gen_range(0..n);
    }
    let mut best = usize::MAX;
    let mut best_occ = u32::MAX;
    let mut ties = 0u32;
    for s in index::sample(rng, n, d).into_iter() {
        let o = pool.occupancy(s);
        if o < best_occ {
            best = s;
            best_occ = o;
            ties = 1;
        } else if o == best_occ {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                best = s;
            }
        }
    }
    best
}

fn least_loaded<R: Rng + ?Sized>(pool: &ServerPool, rng: &mut R) -> usize {
    pool.least_loaded()
        .pick(rng)
        .expect("some level is occupied")
}

/// Picks the server for an arriving flow under `scheme`.
///
/// Pull-based assignment goes to an invite server, else to a server below
/// `h`, else anywhere. Shedding drops flows that land on a server at `h`.
/// The two transfer schemes move such flows to an invite (or, failing that,
/// accepting) server, or to a least-loaded one; when no better server
/// exists the flow stays.
pub fn assign_flow<R: Rng + ?Sized>(
    scheme: &SchemeConfig,
    pool: &ServerPool,
    rng: &mut R,
) -> Result<Assignment> {
    let n = pool.n();
    Ok(match *scheme {
        SchemeConfig::PowerOfD {
            d: Choices::Sample(d),
        } if (d as usize) < n => Assignment::keep(least_of_sample(pool, d as usize, rng)),
        SchemeConfig::PowerOfD { .. } => Assignment::keep(least_loaded(pool, rng)),
        SchemeConfig::PullBased { .. } => {
            let server = pool
                .invite()
                .pick(rng)
                .or_else(|| pool.accepting().pick(rng))
                .unwrap_or_else(|| rng.gen_range(0..n));
            Assignment::keep(server)
        }
        SchemeConfig::Shedding { h } => {
            let server = rng.gen_range(0..n);
            if h.reached_by(pool.occupancy(server)) {
                Assignment::discard()
            } else {
                Assignment::keep(server)
            }
        }
        SchemeConfig::TransferToInvite { h, .. } => {
            let server = rng.gen_range(0..n);
            if pool.occupancy(server) < h {
                Assignment::keep(server)
            } else {
                match pool
                    .invite()
                    .pick(rng)
                    .or_else(|| pool.accepting().pick(rng))
                {
                    Some(to) => Assignment::moved(server, to),
                    None => Assignment::keep(server),
                }
            }
        }
        SchemeConfig::TransferToLeastLoaded { h } => {
            let server = rng.gen_range(0..n);
            let occ = pool.occupancy(server);
            if occ < h || occ == pool.min_level() {
                Assignment::keep(server)
            } else {
                Assignment::moved(server, least_loaded(pool, rng))
            }
        }
        SchemeConfig::BinBased { .. } => {
            return Err(Error::Unsupported(
                "bin-based assignment runs in the bin simulator".into(),
            ))
        }
    })
}

/// Invite and high thresholds the server pool tracks for a scheme.
pub(crate) fn thresholds(scheme: &SchemeConfig) -> (u32, Threshold) {
    match *scheme {
        SchemeConfig::PullBased { l, h } | SchemeConfig::BinBased { l, h, .. } => (l, h),
        SchemeConfig::TransferToInvite { l, h } => (l, Threshold::Finite(h)),
        SchemeConfig::Shedding { h } => (0, h),
        SchemeConfig::TransferToLeastLoaded { h } => (0, Threshold::Finite(h)),
        SchemeConfig::PowerOfD { .. } => (0, Threshold::Infinite),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool_with(occ: &[u32], scheme: &SchemeConfig) -> ServerPool {
        let (l, h) = thresholds(scheme);
        let mut pool = ServerPool::new(occ.len(), l, h, 0.0);
        for (s, &o) in occ.iter().enumerate() {
            if o > 0 {
                pool.add(s, o, 0.0);
            }
        }
        pool
    }

    #[test]
    fn jsq_picks_unique_minimum() {
        let scheme = SchemeConfig::jsq();
        let pool = pool_with(&[3, 1, 2, 4], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            assert_eq!(
                assign_flow(&scheme, &pool, &mut rng).unwrap(),
                Assignment::keep(1)
            );
        }
    }

    #[test]
    fn power_of_n_is_jsq() {
        let scheme = SchemeConfig::PowerOfD {
            d: Choices::Sample(4),
        };
        let pool = pool_with(&[3, 1, 2, 4], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(
            assign_flow(&scheme, &pool, &mut rng).unwrap().server,
            Some(1)
        );
    }

    #[test]
    fn power_of_two_never_picks_global_maximum_with_distinct_loads() {
        let scheme = SchemeConfig::PowerOfD {
            d: Choices::Sample(2),
        };
        let pool = pool_with(&[0, 1, 2, 3, 4], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_ne!(
                assign_flow(&scheme, &pool, &mut rng).unwrap().server,
                Some(4)
            );
        }
    }

    #[test]
    fn shedding_discards_at_threshold() {
        let scheme = SchemeConfig::Shedding {
            h: Threshold::Finite(2),
        };
        let pool = pool_with(&[2, 2, 2], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            assign_flow(&scheme, &pool, &mut rng).unwrap(),
            Assignment::discard()
        );
    }

    #[test]
    fn transfer_invite_moves_to_invite_server() {
        let scheme = SchemeConfig::TransferToInvite { l: 1, h: 2 };
        let pool = pool_with(&[2, 2, 2, 0], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = assign_flow(&scheme, &pool, &mut rng).unwrap();
            match a.transfer {
                Some(t) => {
                    assert_eq!(t.to, 3);
                    assert!(a.violation);
                }
                None => assert_eq!(a, Assignment::keep(3)),
            }
        }
    }

    #[test]
    fn transfer_invite_falls_back_to_accepting_then_stays() {
        let scheme = SchemeConfig::TransferToInvite { l: 1, h: 3 };
        let pool = pool_with(&[3, 2], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = assign_flow(&scheme, &pool, &mut rng).unwrap();
            assert_eq!(a.server, Some(1));
        }
        let pool = pool_with(&[3, 4], &scheme);
        let a = assign_flow(&scheme, &pool, &mut rng).unwrap();
        assert!(!a.violation && a.transfer.is_none());
    }

    #[test]
    fn least_loaded_transfer() {
        let scheme = SchemeConfig::TransferToLeastLoaded { h: 2 };
        let pool = pool_with(&[2, 5, 1], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = assign_flow(&scheme, &pool, &mut rng).unwrap();
            assert_eq!(a.server, Some(2));
        }
        // chosen server already least loaded: keep it
        let pool = pool_with(&[3, 3], &scheme);
        let a = assign_flow(&scheme, &pool, &mut rng).unwrap();
        assert!(!a.violation);
    }

    #[test]
    fn pull_prefers_invites_then_accepting() {
        let scheme = SchemeConfig::PullBased {
            l: 1,
            h: Threshold::Finite(3),
        };
        let pool = pool_with(&[0, 2, 3], &scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(
            assign_flow(&scheme, &pool, &mut rng).unwrap().server,
            Some(0)
        );
        let pool = pool_with(&[1, 2, 3], &scheme);
        for _ in 0..20 {
            let s = assign_flow(&scheme, &pool, &mut rng)
                .unwrap()
                .server
                .unwrap();
            assert!(s < 2);
        }
    }
}
