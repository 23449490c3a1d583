//! Small numerical kernels shared by the solvers: bisection, uniform grids
//! and composite Simpson quadrature.

use crate::error::{Error, Result};

/// Hard cap on bisection halvings; 1e6 down to 1e-15 takes ~70.
const MAX_BISECTIONS: usize = 400;

/// Bisection for a sign change of `g` on `[lo, hi]`.
///
/// `g(lo)` and `g(hi)` must have opposite signs (zero at either end is
/// returned immediately). Stops once the bracket is narrower than `width`.
pub fn bisect<G>(g: G, mut lo: f64, mut hi: f64, width: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    if !(lo <= hi) {
        return Err(Error::Bracket(format!("inverted bracket [{lo}, {hi}]")));
    }
    let mut g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: g = ({g_lo}, {g_hi})"
        )));
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive (`n == 1` gives `lo`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
                .collect()
        }
    }
}

/// Composite Simpson rule with `intervals` subintervals (rounded up to even).
pub fn simpson<G>(g: G, a: f64, b: f64, intervals: usize) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let n = intervals.max(2).next_multiple_of(2);
    if a == b {
        return Ok(0.0);
    }
    let h = (b - a) / n as f64;
    let mut acc = g(a)? + g(b)?;
    for k in 1..n {
        let x = a + h * k as f64;
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(x)?;
    }
    Ok(acc * h / 3.0)
}
