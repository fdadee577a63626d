//! Revenue-optimal and socially optimal thresholds and prices.
//!
//! With every consumer participating (`x_t = x₀` is optimal for both
//! objectives), the first-order conditions in `y_t` reduce to `a = g(y_t)`
//! for revenue and `a = h(y_t)` for welfare. Both `g` and `h` are increasing
//! and unbounded, so each condition has at most one root and bisection on
//! `[y₀, ∞)` finds it. When `a` does not exceed the value at `y₀`, no CP is
//! excluded.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{self, MarketParams, Pricing, Thresholds};
use crate::roots::{bisect, solve_increasing, BisectConfig};
use crate::valuefn::PhiSpec;

/// Number of points in the sign scan that precedes the transition search.
pub const TRANSITION_SCAN_POINTS: usize = 200;
/// The scan covers `[1.01ζ, 20ζ]`.
pub const TRANSITION_SCAN_RANGE: (f64, f64) = (1.01, 20.0);
/// Bracket expansion stops at `ζ·2^16`.
pub const TRANSITION_MAX_FACTOR: f64 = 65536.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// No CP is excluded: `y_t = y₀`.
    Boundary,
    /// CPs below an interior cutoff `y_t > y₀` are excluded.
    Interior,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Boundary => "boundary",
            Regime::Interior => "interior",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegimeSolution {
    pub regime: Regime,
    pub thresholds: Thresholds,
    /// Fees implied by the thresholds. `b < 0` is a CP subsidy.
    pub pricing: Pricing,
    pub revenue: f64,
    pub welfare: f64,
    /// False when other price pairs induce the same thresholds.
    pub prices_unique: bool,
}

/// `ζ = max(g(y₀), h(y₀))`, `η = min(g(y₀), h(y₀))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConstants {
    pub zeta: f64,
    pub eta: f64,
}

fn cutoff_tail(p: &MarketParams, y_t: f64) -> Result<f64> {
    p.beta().tail_first_moment(y_t)
}

/// `(γ−2)/(γ−1)`, the ratio `x₀/X̄`.
fn min_to_mean_ratio(p: &MarketParams) -> f64 {
    let g = p.gamma().value();
    (g - 2.0) / (g - 1.0)
}

/// Revenue marginal condition:
/// `g(y_t) = ½·((γ−2)/(γ−1)·φ′(Z·x₀) + λ)·X̄·√Ȳ/√(∫_{y_t}y^{1−β})`
/// with `Z = √(Ȳ·∫_{y_t}y^{1−β})`.
pub fn g(p: &MarketParams, y_t: f64) -> Result<f64> {
    let fy = cutoff_tail(p, y_t)?;
    let z = (p.mean_y() * fy).sqrt();
    let slope = p.phi().derivative(z * p.x0())?;
    Ok(0.5 * (min_to_mean_ratio(p) * slope + p.lambda()) * p.mean_x() * (p.mean_y() / fy).sqrt())
}

/// Welfare marginal condition:
/// `h(y_t) = ½·(∫_{x₀}φ′(Zx)x^{1−γ}dx + λX̄)·√Ȳ/√(∫_{y_t}y^{1−β})`.
pub fn h(p: &MarketParams, y_t: f64) -> Result<f64> {
    let fy = cutoff_tail(p, y_t)?;
    let z = (p.mean_y() * fy).sqrt();
    let integral = p.phi().phi_prime_tail_integral(p.gamma(), z)?;
    Ok(0.5 * (integral + p.lambda() * p.mean_x()) * (p.mean_y() / fy).sqrt())
}

pub fn constants(p: &MarketParams) -> Result<ThresholdConstants> {
    let g0 = g(p, p.y0())?;
    let h0 = h(p, p.y0())?;
    Ok(ThresholdConstants {
        zeta: g0.max(h0),
        eta: g0.min(h0),
    })
}

fn finish(p: &MarketParams, regime: Regime, y_t: f64, pricing: Pricing, prices_unique: bool) -> Result<RegimeSolution> {
    let thresholds = Thresholds::new(p.x0(), y_t);
    Ok(RegimeSolution {
        regime,
        thresholds,
        pricing,
        revenue: market::threshold_revenue(p, thresholds)?,
        welfare: market::welfare(p, thresholds)?,
        prices_unique,
    })
}

/// Revenue-optimal CP fee when the consumer fee is fixed at zero.
///
/// Below `a = λX̄/2` the ISP keeps every CP and charges `b = λX̄ − a`;
/// above it, the cutoff satisfies `∫_{y_t}y^{1−β} = Ȳ·(λX̄/(2a))²` and `b = a`.
pub fn solve_revenue_c0(p: &MarketParams) -> Result<RegimeSolution> {
    let a = p.a();
    let lx = p.lambda() * p.mean_x();
    let (regime, y_t, b) = if a <= 0.5 * lx {
        (Regime::Boundary, p.y0(), lx - a)
    } else {
        let tail = p.mean_y() * (lx / (2.0 * a)).powi(2);
        (Regime::Interior, p.beta().type_with_tail_first_moment(tail)?, a)
    };
    if b < 0.0 {
        return Err(Error::Internal(format!("zero-consumer-fee optimum has b = {b} < 0")));
    }
    let thresholds = Thresholds::new(p.x0(), y_t);
    Ok(RegimeSolution {
        regime,
        thresholds,
        pricing: Pricing { b, c: 0.0 },
        revenue: market::cp_fee_revenue(p, y_t)?,
        welfare: market::welfare(p, thresholds)?,
        prices_unique: true,
    })
}

/// Revenue-optimal consumer and CP fees.
///
/// If `a ≤ g(y₀)` every CP stays, `b = λX̄ − a` and `c = φ(Ȳx₀)`. Otherwise
/// the cutoff `y*` solves `g(y*) = a`, with
/// `b = (2λ/((γ−2)/(γ−1)·φ′(Z*x₀) + λ) − 1)·a` and `c = φ(Z*x₀)`.
pub fn solve_revenue(p: &MarketParams) -> Result<RegimeSolution> {
    let a = p.a();
    let g0 = g(p, p.y0())?;
    if a <= g0 {
        let th = p.full_participation();
        return finish(p, Regime::Boundary, p.y0(), market::implied_prices(p, th)?, true);
    }
    let y_star = solve_increasing(|y| g(p, y), a, p.y0(), BisectConfig::default())?;
    let z = (p.mean_y() * cutoff_tail(p, y_star)?).sqrt();
    let slope = p.phi().derivative(z * p.x0())?;
    let b = (2.0 * p.lambda() / (min_to_mean_ratio(p) * slope + p.lambda()) - 1.0) * a;
    let c = p.phi().value(z * p.x0())?;
    finish(p, Regime::Interior, y_star, Pricing { b, c }, true)
}

/// Welfare-maximizing thresholds. The cutoff is `y₀` when `a ≤ h(y₀)` and
/// otherwise the root `ŷ` of `h(ŷ) = a`. Any fees that induce these
/// thresholds are optimal; the returned pair is the largest one, the fees
/// that leave the marginal types indifferent.
pub fn solve_social(p: &MarketParams) -> Result<RegimeSolution> {
    let a = p.a();
    let h0 = h(p, p.y0())?;
    let (regime, y_t) = if a <= h0 {
        (Regime::Boundary, p.y0())
    } else {
        (
            Regime::Interior,
            solve_increasing(|y| h(p, y), a, p.y0(), BisectConfig::default())?,
        )
    };
    let pricing = market::implied_prices(p, Thresholds::new(p.x0(), y_t))?;
    finish(p, regime, y_t, pricing, false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoffs {
    /// Welfare-optimal cutoff.
    pub y_hat: f64,
    /// Revenue-optimal cutoff.
    pub y_star: f64,
}

fn require_fractional_power(p: &MarketParams, what: &str) -> Result<()> {
    match p.phi() {
        PhiSpec::FractionalPower { .. } => Ok(()),
        PhiSpec::Custom(_) => Err(Error::Unsupported(format!("{what} needs φ(x) = x^θ"))),
    }
}

/// Both cutoffs for `a > ζ`, where revenue maximization excludes strictly
/// more CPs than the social optimum.
pub fn compare_cutoffs(p: &MarketParams) -> Result<Cutoffs> {
    require_fractional_power(p, "cutoff comparison")?;
    let k = constants(p)?;
    if p.a() <= k.zeta {
        return Err(Error::Precondition(format!(
            "cutoff comparison needs a > ζ = {}, got a = {}",
            k.zeta,
            p.a()
        )));
    }
    let y_hat = solve_social(p)?.thresholds.y_t;
    let y_star = solve_revenue(p)?.thresholds.y_t;
    if !(y_hat < y_star) {
        return Err(Error::Internal(format!(
            "expected ŷ < y*, got ŷ = {y_hat}, y* = {y_star}"
        )));
    }
    Ok(Cutoffs { y_hat, y_star })
}

/// Welfare under the three regimes at one CP cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareComparison {
    pub a: f64,
    /// `S₀(a)`: welfare with every CP in and `b = 0`.
    pub neutral: f64,
    /// `S*(a)`: welfare at the revenue-optimal cutoff.
    pub revenue_opt: f64,
    pub social_opt: f64,
    pub y_star: f64,
    pub y_hat: f64,
    /// True when `a ≤ ζ`.
    pub boundary_regime: bool,
}

impl WelfareComparison {
    /// `S₀(a) − S*(a)`.
    pub fn gap(&self) -> f64 {
        self.neutral - self.revenue_opt
    }
}

pub fn compare_welfare(p_base: &MarketParams, a: f64) -> Result<WelfareComparison> {
    let p = p_base.with_a(a)?;
    let revenue = solve_revenue(&p)?;
    let social = solve_social(&p)?;
    Ok(WelfareComparison {
        a,
        neutral: market::welfare(&p, p.full_participation())?,
        revenue_opt: revenue.welfare,
        social_opt: social.welfare,
        y_star: revenue.thresholds.y_t,
        y_hat: social.thresholds.y_t,
        boundary_regime: a <= constants(&p)?.zeta,
    })
}

/// `S₀(a) − S*(a)`: positive where net neutrality yields more welfare than
/// revenue maximization.
pub fn welfare_gap(p_base: &MarketParams, a: f64) -> Result<f64> {
    let p = p_base.with_a(a)?;
    let y_star = solve_revenue(&p)?.thresholds.y_t;
    let neutral = market::welfare(&p, p.full_participation())?;
    let revenue_opt = market::welfare(&p, Thresholds::new(p.x0(), y_star))?;
    Ok(neutral - revenue_opt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// The CP cost `ā` where `S₀(ā) = S*(ā)`.
    pub a_bar: f64,
    pub zeta: f64,
    pub gap_at_root: f64,
    /// Sign changes seen by the scan over `[1.01ζ, 20ζ]`.
    pub scan_sign_changes: usize,
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo * (step * i as f64).exp() })
        .collect()
}

/// Counts strict sign changes in a sequence, skipping exact zeros.
pub fn sign_changes(values: &[f64]) -> Vec<usize> {
    let mut changes = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some((j, s)) = last {
            if s != v.signum() {
                changes.push(j);
            }
        }
        last = Some((i, v.signum()));
    }
    changes
}

/// Locates the unique CP cost `ā` at which net-neutrality welfare and
/// revenue-optimal welfare coincide. A 200-point scan over `[1.01ζ, 20ζ]`
/// runs first; more than one sign change is reported as an error.
pub fn find_transition(p_base: &MarketParams) -> Result<Transition> {
    require_fractional_power(p_base, "transition search")?;
    let zeta = constants(p_base)?.zeta;
    let (lo_factor, hi_factor) = TRANSITION_SCAN_RANGE;
    let grid = log_grid(lo_factor * zeta, hi_factor * zeta, TRANSITION_SCAN_POINTS);
    let gaps: Vec<f64> = grid
        .par_iter()
        .map(|&a| welfare_gap(p_base, a))
        .collect::<Result<_>>()?;
    let changes = sign_changes(&gaps);
    let (lo, hi) = match changes.as_slice() {
        [i] => {
            // The change sits between index i and the next nonzero value.
            let j = (i + 1..gaps.len()).find(|&j| gaps[j] != 0.0).unwrap_or(i + 1);
            (grid[*i], grid[j])
        }
        [] => {
            let first = gaps[0];
            if first < 0.0 {
                let start = zeta * (1.0 + 1e-6);
                if welfare_gap(p_base, start)? <= 0.0 {
                    return Err(Error::Search(format!(
                        "welfare gap is not positive just above ζ = {zeta}"
                    )));
                }
                (start, grid[0])
            } else {
                let mut lo = *grid.last().expect("scan grid is non-empty");
                let mut hi = lo * 2.0;
                loop {
                    if welfare_gap(p_base, hi)? < 0.0 {
                        break (lo, hi);
                    }
                    if hi >= zeta * TRANSITION_MAX_FACTOR {
                        return Err(Error::Search(format!(
                            "no sign change of the welfare gap in [ζ, ζ·2^16] with ζ = {zeta}"
                        )));
                    }
                    lo = hi;
                    hi *= 2.0;
                }
            }
        }
        many => {
            return Err(Error::Search(format!(
                "welfare gap changes sign {} times on the scan grid",
                many.len()
            )))
        }
    };
    let scale = market::welfare(p_base, p_base.full_participation())?.abs().max(1.0);
    let cfg = BisectConfig {
        abs_tol: 1e-14 * hi,
        rel_residual: 1e-13,
        max_iter: 2000,
    };
    let a_bar = bisect(|a| welfare_gap(p_base, a), lo, hi, scale, cfg)?;
    Ok(Transition {
        a_bar,
        zeta,
        gap_at_root: welfare_gap(p_base, a_bar)?,
        scan_sign_changes: changes.len(),
    })
}
