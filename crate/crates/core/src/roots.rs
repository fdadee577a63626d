//! Bisection for monotone and sign-changing scalar functions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BisectConfig {
    /// Stop once the bracket is narrower than this.
    pub abs_tol: f64,
    /// Stop once `|f(x) − target| ≤ rel_residual·|target|`.
    pub rel_residual: f64,
    pub max_iter: usize,
}

impl Default for BisectConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_residual: 1e-12,
            max_iter: 2000,
        }
    }
}

const MAX_DOUBLINGS: usize = 1000;

/// Smallest `x ≥ lo` with `f(x) = target` for a continuous increasing `f`
/// that is unbounded above. The upper end of the bracket starts at `2·lo`
/// and doubles until `f` reaches the target.
pub fn solve_increasing<F>(mut f: F, target: f64, lo: f64, cfg: BisectConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo > 0.0 && lo.is_finite()) {
        return Err(Error::RootBracket(format!("lower end must be positive, got {lo}")));
    }
    let f_lo = f(lo)?;
    if f_lo >= target {
        return Ok(lo);
    }
    let mut a = lo;
    let mut b = 2.0 * lo;
    let mut doublings = 0;
    loop {
        let fb = f(b)?;
        if fb >= target {
            break;
        }
        if !fb.is_finite() || doublings == MAX_DOUBLINGS || !b.is_finite() {
            return Err(Error::RootBracket(format!(
                "f stayed below {target} up to x = {b} (f = {fb})"
            )));
        }
        a = b;
        b *= 2.0;
        doublings += 1;
    }
    bisect(|x| Ok(f(x)? - target), a, b, target.abs(), cfg)
}

/// Root of `f` on `[a, b]` where `f(a)` and `f(b)` have opposite signs (or
/// one is zero). `scale` sets the residual tolerance `rel_residual·scale`.
pub fn bisect<F>(mut f: F, a: f64, b: f64, scale: f64, cfg: BisectConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::RootBracket(format!(
            "no sign change on [{lo}, {hi}]: f = {f_lo}, {f_hi}"
        )));
    }
    let tol = cfg.rel_residual * scale;
    let mut best = if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm.abs() <= tol || fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= cfg.abs_tol {
            break;
        }
    }
    Ok(best.0)
}
