//! Random-walk jump tails and the associated error terms.

use statrs::function::gamma::ln_gamma;

use crate::environment::ScalingConstants;
use crate::error::{invalid, Result};

/// `log P(Poisson(mean) ≥ n)`.
pub fn log_poisson_upper_tail(mean: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if mean <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let log_mean = mean.ln();
    let log_pmf = |k: u64| k as f64 * log_mean - mean - ln_gamma(k as f64 + 1.0);
    let nf = n as f64;
    if nf > mean {
        // terms decrease from k = n on; sum relative to the first
        let first = log_pmf(n);
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut k = n;
        loop {
            k += 1;
            term *= mean / k as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        first + sum.ln()
    } else {
        // complement of the lower tail, summed downward from its largest term
        let top = log_pmf(n - 1);
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut k = n - 1;
        while k > 0 {
            term *= k as f64 / mean;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            k -= 1;
        }
        let log_lower = top + sum.ln();
        if log_lower >= 0.0 {
            f64::NEG_INFINITY
        } else {
            (-log_lower.exp()).ln_1p()
        }
    }
}

fn check_positive(s: f64, r: f64) -> Result<()> {
    if !(s > 0.0 && r > 0.0) || !s.is_finite() || !r.is_finite() {
        return Err(invalid(format!("s = {s} and R = {r} must be positive")));
    }
    Ok(())
}

/// `log J_T(s, R)`: the walk makes at least `R r(T)` jumps by time `sT`.
pub fn log_jump_tail(s: f64, r: f64, scaling: &ScalingConstants) -> Result<f64> {
    check_positive(s, r)?;
    let n = (r * scaling.r_t).ceil() as u64;
    let mean = 2.0 * scaling.d as f64 * s * scaling.t;
    Ok(log_poisson_upper_tail(mean, n))
}

pub fn jump_tail(s: f64, r: f64, scaling: &ScalingConstants) -> Result<f64> {
    Ok(log_jump_tail(s, r, scaling)?.exp())
}

/// `(E1, E2)` error terms at `(s, R)`.
pub fn error_terms(s: f64, r: f64, scaling: &ScalingConstants) -> Result<(f64, f64)> {
    check_positive(s, r)?;
    let log_t = scaling.t.ln();
    let d = scaling.d as f64;
    let e1 = r / log_t * (r.ln() - s.ln()) + 2.0 * d * s / scaling.a_t;
    let e2 = r / log_t
        * (s.ln() - r.ln() + 1.0 + (2.0 * d).ln() + (scaling.q + 1.0) * log_t.ln());
    Ok((e1, e2))
}

/// Exponent of the Stirling bound: `-a(T) T (q R - E2)`.
pub fn stirling_log_bound(s: f64, r: f64, scaling: &ScalingConstants) -> Result<f64> {
    let (_, e2) = error_terms(s, r, scaling)?;
    Ok(-scaling.a_t * scaling.t * (scaling.q * r - e2))
}
