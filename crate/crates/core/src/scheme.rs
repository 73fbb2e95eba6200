//! Flow- and bin-level load-balancing scheme descriptions.

use std::fmt;

use crate::error::{Error, Result};

/// A high threshold that may be absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Threshold {
    Finite(u32),
    Infinite,
}

impl Threshold {
    pub fn finite(self) -> Option<u32> {
        match self {
            Threshold::Finite(h) => Some(h),
            Threshold::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Threshold::Infinite)
    }

    /// Whether an occupancy has reached the threshold.
    pub fn reached_by(self, occupancy: u32) -> bool {
        match self {
            Threshold::Finite(h) => occupancy >= h,
            Threshold::Infinite => false,
        }
    }

    /// Whether `x` exceeds the threshold (always false when infinite).
    pub fn exceeded_by(self, x: f64) -> bool {
        match self {
            Threshold::Finite(h) => x >= h as f64,
            Threshold::Infinite => false,
        }
    }
}

impl From<u32> for Threshold {
    fn from(h: u32) -> Self {
        Threshold::Finite(h)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(h) => write!(f, "{h}"),
            Threshold::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Threshold::Infinite),
            other => other
                .parse::<u32>()
                .map(Threshold::Finite)
                .map_err(|e| Error::param("h", format!("`{other}`: {e}"))),
        }
    }
}

/// Number of servers sampled by power-of-d; `All` is flow-level JSQ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choices {
    Sample(u32),
    All,
}

impl fmt::Display for Choices {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choices::Sample(d) => write!(f, "{d}"),
            Choices::All => write!(f, "n"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeConfig {
    /// Least-loaded of `d` uniformly sampled servers.
    PowerOfD { d: Choices },
    /// Invite / disinvite messages at thresholds `l` and `h`.
    PullBased { l: u32, h: Threshold },
    /// Random assignment, flows arriving at a server with `h` flows are dropped.
    Shedding { h: Threshold },
    /// Random assignment, overflow at `h` moves to an invite server (< `l` flows).
    TransferToInvite { l: u32, h: u32 },
    /// Random assignment, overflow at `h` moves to a least-loaded server.
    TransferToLeastLoaded { h: u32 },
    /// Static hash of flows into `m` bins with pull-based bin re-allocation.
    BinBased { m: usize, l: u32, h: Threshold },
}

impl SchemeConfig {
    pub fn jsq() -> Self {
        SchemeConfig::PowerOfD { d: Choices::All }
    }

    pub fn random() -> Self {
        SchemeConfig::PowerOfD {
            d: Choices::Sample(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_lh = |l: u32, h: Threshold| match h {
            Threshold::Finite(h) if h <= l => Err(Error::param(
                "h",
                format!("high threshold {h} must exceed low threshold {l}"),
            )),
            _ => Ok(()),
        };
        match *self {
            SchemeConfig::PowerOfD {
                d: Choices::Sample(0),
            } => Err(Error::param("d", "at least one choice is required")),
            SchemeConfig::PowerOfD { .. } => Ok(()),
            SchemeConfig::PullBased { l, h } => check_lh(l, h),
            SchemeConfig::Shedding { .. } => Ok(()),
            SchemeConfig::TransferToInvite { l, h } => check_lh(l, Threshold::Finite(h)),
            SchemeConfig::TransferToLeastLoaded { .. } => Ok(()),
            SchemeConfig::BinBased { m, l, h } => {
                if m == 0 {
                    return Err(Error::param("m", "at least one bin is required"));
                }
                check_lh(l, h)
            }
        }
    }

    /// Short family name used in catalogs and CSV files.
    pub fn family(&self) -> &'static str {
        match self {
            SchemeConfig::PowerOfD { d: Choices::All } => "jsq",
            SchemeConfig::PowerOfD { .. } => "power-of-d",
            SchemeConfig::PullBased { .. } => "pull",
            SchemeConfig::Shedding { .. } => "shedding",
            SchemeConfig::TransferToInvite { .. } => "transfer-invite",
            SchemeConfig::TransferToLeastLoaded { .. } => "least-loaded",
            SchemeConfig::BinBased { .. } => "bin",
        }
    }

    /// Whether the scheme may break stickiness (drop or move flows).
    pub fn may_violate(&self) -> bool {
        match self {
            SchemeConfig::PowerOfD { .. } | SchemeConfig::PullBased { .. } => false,
            SchemeConfig::Shedding { h } => !h.is_infinite(),
            SchemeConfig::BinBased { h, .. } => !h.is_infinite(),
            _ => true,
        }
    }
}

impl fmt::Display for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeConfig::PowerOfD { d } => write!(f, "power-of-d(d={d})"),
            SchemeConfig::PullBased { l, h } => write!(f, "pull(l={l},h={h})"),
            SchemeConfig::Shedding { h } => write!(f, "shedding(h={h})"),
            SchemeConfig::TransferToInvite { l, h } => write!(f, "transfer-invite(l={l},h={h})"),
            SchemeConfig::TransferToLeastLoaded { h } => write!(f, "least-loaded(h={h})"),
            SchemeConfig::BinBased { m, l, h } => write!(f, "bin(m={m},l={l},h={h})"),
        }
    }
}
