//! Log-space Poisson arithmetic.
//!
//! Everything here works with logarithms of probabilities: at the loads of
//! interest (ρ in the hundreds, `a_chi` in the thousands) the direct forms
//! `a^k / k!` overflow long before the probabilities themselves become small.

use std::sync::OnceLock;

const TABLE_LEN: usize = 8192;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// ln(k!).
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < TABLE_LEN {
        return ln_factorial_table()[k as usize];
    }
    // Stirling series; the truncation error is far below f64 resolution here.
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// ln k! − ((k + ½) ln k − k + ½ ln 2π), the Stirling remainder.
fn stirling_error(k: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = k as f64;
    if k <= 15 {
        return ln_factorial(k)
            - ((n + 0.5) * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI).ln());
    }
    let nn = n * n;
    let series = if k > 500 {
        S0 - S1 / nn
    } else if k > 80 {
        S0 - (S1 - S2 / nn) / nn
    } else if k > 35 {
        S0 - (S1 - (S2 - S3 / nn) / nn) / nn
    } else {
        S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn
    };
    series / n
}

/// x ln(x/m) + m − x without cancellation when x ≈ m.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut sum = (x - m) * v;
        let mut term = 2.0 * x * v;
        v *= v;
        for j in 1.. {
            term *= v;
            let next = sum + term / (2 * j + 1) as f64;
            if next == sum {
                break;
            }
            sum = next;
        }
        sum
    } else {
        x * (x / m).ln() + m - x
    }
}

/// ln f_a(k), the log of the Poisson(a) pmf at k, in the saddle-point form
/// that keeps full relative precision for large `a` and `k`.
pub fn ln_pmf(k: u64, a: f64) -> f64 {
    if a == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0 {
        return -a;
    }
    let x = k as f64;
    -stirling_error(k) - deviance(x, a) - 0.5 * (2.0 * std::f64::consts::PI * x).ln()
}

/// ln(e^x + e^y).
pub fn ln_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln Σ e^{x_i}, accumulated smallest-first.
pub fn ln_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut scaled: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    scaled.sort_by(|a, b| a.total_cmp(b));
    max + scaled.iter().sum::<f64>().ln()
}

/// ln Σ_{j=lo}^{hi} f_a(j); −∞ for an empty range.
pub fn ln_range(lo: u64, hi: u64, a: f64) -> f64 {
    if lo > hi {
        return f64::NEG_INFINITY;
    }
    let terms: Vec<f64> = (lo..=hi).map(|j| ln_pmf(j, a)).collect();
    ln_sum_exp(&terms)
}

/// ln F_a(k) = ln P(X ≤ k) for X ~ Poisson(a). `k < 0` gives −∞.
pub fn ln_cdf(k: i64, a: f64) -> f64 {
    if k < 0 {
        return f64::NEG_INFINITY;
    }
    ln_range(0, k as u64, a)
}

/// ln P(X ≥ k) for X ~ Poisson(a), summed until the terms are negligible.
pub fn ln_upper_tail(k: u64, a: f64) -> f64 {
    let mode = a.floor() as u64;
    let mut terms = Vec::new();
    let mut j = k;
    let mut max = f64::NEG_INFINITY;
    loop {
        let t = ln_pmf(j, a);
        max = max.max(t);
        terms.push(t);
        if j > mode && t < max - 50.0 {
            break;
        }
        j += 1;
    }
    ln_sum_exp(&terms)
}

/// Poisson(a) pmf on 0..=i_max, renormalized to the window.
pub fn truncated_pmf(a: f64, i_max: usize) -> Vec<f64> {
    let logs: Vec<f64> = (0..=i_max as u64).map(|k| ln_pmf(k, a)).collect();
    normalize_log_weights(&logs)
}

/// exp(x_i - ln Σ e^{x_j}).
pub fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let total = ln_sum_exp(logs);
    logs.iter().map(|x| (x - total).exp()).collect()
}

/// Truncation level holding all but a negligible Poisson(ρ) tail:
/// ⌈ρ + 12√ρ⌉, and at least 12 so tiny loads keep a few levels.
pub fn default_truncation(rho: f64) -> usize {
    ((rho + 12.0 * rho.sqrt()).ceil() as usize).max(12)
}
