use crate::error::{Error, Result};

const MAX_WIDENINGS: usize = 200;
const MAX_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOutcome {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Solves `f(x) = target` for non-decreasing `f` on `[0, ∞)`, starting from
/// the bracket `[lo, hi]` and widening it geometrically when it does not
/// straddle the target (down to 0, or geometrically upward). Bisects until the interval cannot be split further.
pub fn bisect_increasing(
    mut f: impl FnMut(f64) -> Result<f64>,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<BisectOutcome> {
    lo = lo.max(0.0);
    hi = hi.max(lo + 1.0);
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;

    let mut widenings = 0;
    if f_lo > target && lo > 0.0 {
        hi = lo;
        f_hi = f_lo;
        lo = 0.0;
        f_lo = f(lo)?;
    }
    while f_hi < target && widenings < MAX_WIDENINGS {
        let width = hi - lo;
        lo = hi;
        f_lo = f_hi;
        hi = lo + 2.0 * width;
        f_hi = f(hi)?;
        widenings += 1;
    }
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Bracket {
            lo,
            hi,
            f_lo,
            f_hi,
            target,
        });
    }
    if f_lo == target {
        return Ok(BisectOutcome {
            x: lo,
            value: f_lo,
            iterations: 0,
        });
    }
    if f_hi == target {
        return Ok(BisectOutcome {
            x: hi,
            value: f_hi,
            iterations: 0,
        });
    }

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let f_mid = f(mid)?;
        if f_mid == target {
            return Ok(BisectOutcome {
                x: mid,
                value: f_mid,
                iterations,
            });
        }
        if f_mid < target {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (x, value) = if (target - f_lo).abs() <= (f_hi - target).abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    Ok(BisectOutcome {
        x,
        value,
        iterations,
    })
}
