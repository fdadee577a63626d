//! Two-channel ("Paris metro") pricing. The ISP gives a share `B₁` of the
//! bandwidth to a paid channel and the rest to a free one. CPs of type
//! `y ≥ y_t` pay `b` per unit type to use the paid channel; smaller CPs use
//! the free channel. Consumers pay `c` and reach both. Only `a = 0` is
//! supported, so no CP leaves the market.
//!
//! With `F₁ = ∫_{y_t}^∞ y^{1−β}` and `F₂ = ∫_{y₀}^{y_t} y^{1−β}`, the channel
//! speeds are `v₁ = √(B₁T₀/(F_x·F₁))` and `v₂ = √((1−B₁)T₀/(F_x·F₂))`. A split
//! is feasible when the paid channel is at least as fast, `B₁·F₂ ≥ (1−B₁)·F₁`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{self, MarketParams, Pricing};
use crate::oracle::{log_nodes, DEFAULT_TAIL_CUTOFF};
use crate::valuefn::PhiSpec;

/// λ used by two-channel sweeps unless overridden.
pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const COARSE_POINTS: usize = 200;
pub const ZOOM_POINTS: usize = 41;
pub const ZOOM_ROUNDS: u32 = 3;
pub const ZOOM_FACTOR: f64 = 10.0;
/// Relative slack on the speed-ordering constraint.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSplit {
    /// Bandwidth share of the paid channel.
    pub b1: f64,
    /// Smallest CP type in the paid channel.
    pub y_t: f64,
}

impl ChannelSplit {
    pub fn new(b1: f64, y_t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&b1) {
            return Err(Error::InvalidParameter(format!("B₁ must lie in [0, 1], got {b1}")));
        }
        if !(y_t.is_finite() && y_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "y_t must be positive and finite, got {y_t}"
            )));
        }
        Ok(Self { b1, y_t })
    }

    /// Everything in one channel: `B₁ = 1`, `y_t = y₀`.
    pub fn one_channel(p: &MarketParams) -> Self {
        Self { b1: 1.0, y_t: p.y0() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmpSolution {
    pub split: ChannelSplit,
    pub pricing: Pricing,
    pub revenue: f64,
    /// Revenue of the one-channel market at the same parameters.
    pub one_channel_revenue: f64,
    /// The optimum is the one-channel configuration.
    pub degenerate: bool,
}

/// `(F₁, F₂)`: CP first moments above and below `y_t`.
fn channel_moments(p: &MarketParams, y_t: f64) -> Result<(f64, f64)> {
    let f1 = p.beta().tail_first_moment(y_t)?;
    let f2 = if y_t <= p.y0() {
        0.0
    } else {
        p.beta().first_moment_between(p.y0(), y_t)?
    };
    Ok((f1, f2))
}

fn require_zero_cost(p: &MarketParams) -> Result<()> {
    if p.a() != 0.0 {
        return Err(Error::Unsupported(format!(
            "two-channel pricing needs a = 0, got a = {}",
            p.a()
        )));
    }
    Ok(())
}

fn check_split(p: &MarketParams, split: ChannelSplit) -> Result<()> {
    ChannelSplit::new(split.b1, split.y_t)?;
    if split.y_t < p.y0() * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("y_t = {} is below y₀ = {}", split.y_t, p.y0())));
    }
    Ok(())
}

/// Reduced feasibility test `B₁·F₂ ≥ (1−B₁)·F₁`. With no free-channel CPs
/// (`y_t = y₀`) only `B₁ = 1` qualifies.
pub fn is_feasible(p: &MarketParams, split: ChannelSplit) -> Result<bool> {
    check_split(p, split)?;
    let (f1, f2) = channel_moments(p, split.y_t)?;
    if f2 == 0.0 {
        return Ok(split.b1 == 1.0);
    }
    Ok(split.b1 * f2 >= (1.0 - split.b1) * f1 - FEASIBILITY_SLACK * p.mean_y())
}

/// Channel speeds `(v₁, v₂)` relative to `T₀/T`. A channel with no
/// bandwidth or no CPs has speed 0.
pub fn channel_speeds(p: &MarketParams, x_t: f64, split: ChannelSplit) -> Result<(f64, f64)> {
    check_split(p, split)?;
    let fx = p.gamma().tail_first_moment(x_t)?;
    let (f1, f2) = channel_moments(p, split.y_t)?;
    let t0 = market::base_traffic(p);
    let v = |share: f64, f: f64| {
        if share == 0.0 || f == 0.0 {
            0.0
        } else {
            (share * t0 / (fx * f)).sqrt()
        }
    };
    Ok((v(split.b1, f1), v(1.0 - split.b1, f2)))
}

/// Speed ordering checked directly on the channel speeds.
pub fn is_feasible_raw(p: &MarketParams, x_t: f64, split: ChannelSplit) -> Result<bool> {
    let (_, f2) = channel_moments(p, split.y_t)?;
    if f2 == 0.0 {
        check_split(p, split)?;
        return Ok(split.b1 == 1.0);
    }
    let (v1, v2) = channel_speeds(p, x_t, split)?;
    Ok(v1 >= v2 * (1.0 - FEASIBILITY_SLACK))
}

/// `(T₁, T₂)` with `T₁ = √(B₁T₀·F_x·F₁)` and `T₂ = √((1−B₁)T₀·F_x·F₂)`.
pub fn channel_traffics(p: &MarketParams, x_t: f64, split: ChannelSplit) -> Result<(f64, f64)> {
    require_zero_cost(p)?;
    check_split(p, split)?;
    let fx = p.gamma().tail_first_moment(x_t)?;
    let (f1, f2) = channel_moments(p, split.y_t)?;
    let t0 = market::base_traffic(p);
    Ok((
        (split.b1 * t0 * fx * f1).sqrt(),
        ((1.0 - split.b1) * t0 * fx * f2).sqrt(),
    ))
}

fn require_feasible(p: &MarketParams, split: ChannelSplit) -> Result<()> {
    if !is_feasible(p, split)? {
        return Err(Error::ConstraintViolation(format!(
            "free channel faster than paid channel at B₁ = {}, y_t = {}",
            split.b1, split.y_t
        )));
    }
    Ok(())
}

/// Consumer fee `c = φ((F₂v₂ + F₁v₁)·x_t)` and CP fee `b = λF_x(v₁ − v₂)`,
/// which leaves the type-`y_t` CP indifferent between channels.
pub fn pmp_prices(p: &MarketParams, x_t: f64, split: ChannelSplit) -> Result<Pricing> {
    require_zero_cost(p)?;
    require_feasible(p, split)?;
    let fx = p.gamma().tail_first_moment(x_t)?;
    let (f1, f2) = channel_moments(p, split.y_t)?;
    let (v1, v2) = channel_speeds(p, x_t, split)?;
    let c = p.phi().value((f2 * v2 + f1 * v1) * x_t)?;
    // Slack on the constraint can leave a rounding-level negative fee.
    let b = (p.lambda() * fx * (v1 - v2)).max(0.0);
    Ok(Pricing { b, c })
}

/// Utilities per unit type of the marginal CP `y_t` in the paid and the free
/// channel.
pub fn marginal_cp_utilities(p: &MarketParams, x_t: f64, split: ChannelSplit, pricing: Pricing) -> Result<(f64, f64)> {
    let fx = p.gamma().tail_first_moment(x_t)?;
    let (v1, v2) = channel_speeds(p, x_t, split)?;
    let y = split.y_t;
    Ok((p.lambda() * y * fx * v1 - pricing.b * y, p.lambda() * y * fx * v2))
}

/// `c·∫_{x_t}x^{-γ} + b·F₁`.
pub fn pmp_revenue(p: &MarketParams, x_t: f64, split: ChannelSplit) -> Result<f64> {
    let prices = pmp_prices(p, x_t, split)?;
    let (f1, _) = channel_moments(p, split.y_t)?;
    Ok(prices.c * p.gamma().tail_mass(x_t)? + prices.b * f1)
}

/// Revenue written out in the tail moments:
/// `φ(√T₀(√(F₁B₁) + √(F₂(1−B₁)))/√F_x·x_t)·∫_{x_t}x^{-γ} + λ(√(B₁T₀F_xF₁) − F₁√((1−B₁)T₀F_x/F₂))`.
pub fn pmp_revenue_expanded(p: &MarketParams, x_t: f64, split: ChannelSplit) -> Result<f64> {
    require_zero_cost(p)?;
    require_feasible(p, split)?;
    let fx = p.gamma().tail_first_moment(x_t)?;
    let (f1, f2) = channel_moments(p, split.y_t)?;
    let t0 = market::base_traffic(p);
    let b1 = split.b1;
    let arg = t0.sqrt() * ((f1 * b1).sqrt() + (f2 * (1.0 - b1)).sqrt()) / fx.sqrt() * x_t;
    let free = if f2 == 0.0 {
        0.0
    } else {
        f1 * ((1.0 - b1) * t0 * fx / f2).sqrt()
    };
    let cp = p.lambda() * ((b1 * t0 * fx * f1).sqrt() - free);
    Ok(p.phi().value(arg)? * p.gamma().tail_mass(x_t)? + cp.max(0.0))
}

/// Revenue of the one-channel market with every type participating.
pub fn one_channel_revenue(p: &MarketParams) -> Result<f64> {
    require_zero_cost(p)?;
    market::revenue(p, p.full_participation())
}

#[derive(Debug, Clone, Copy)]
struct Window {
    ly_lo: f64,
    ly_hi: f64,
    b_lo: f64,
    b_hi: f64,
}

fn best_in_window(p: &MarketParams, w: Window, n: usize) -> Result<Option<(ChannelSplit, f64)>> {
    let y0 = p.y0();
    let ys: Vec<f64> = (0..n)
        .map(|i| match i {
            0 if w.ly_lo == 0.0 => y0,
            _ => y0 * (w.ly_lo + (w.ly_hi - w.ly_lo) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect();
    let bs: Vec<f64> = (0..n)
        .map(|j| {
            if j == n - 1 {
                w.b_hi
            } else {
                w.b_lo + (w.b_hi - w.b_lo) * j as f64 / (n - 1) as f64
            }
        })
        .collect();
    let values: Vec<Option<(ChannelSplit, f64)>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let split = ChannelSplit {
                b1: bs[k % n],
                y_t: ys[k / n],
            };
            if !is_feasible(p, split)? {
                return Ok(None);
            }
            Ok(Some((split, pmp_revenue(p, p.x0(), split)?)))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(ChannelSplit, f64)> = None;
    for v in values.into_iter().flatten() {
        if best.is_none_or(|(_, r)| v.1 > r) {
            best = Some(v);
        }
    }
    Ok(best)
}

/// Revenue-maximizing split with consumers from `x₀` up. A 200×200 grid
/// (log in `y_t`, linear in `B₁`) is followed by three rounds of 10× zoom
/// around the incumbent.
pub fn solve_pmp(p: &MarketParams) -> Result<PmpSolution> {
    require_zero_cost(p)?;
    let y_cap = p.beta().type_with_tail_mass(DEFAULT_TAIL_CUTOFF)?;
    let span = (y_cap / p.y0()).ln();
    let coarse = Window {
        ly_lo: 0.0,
        ly_hi: span,
        b_lo: 0.0,
        b_hi: 1.0,
    };
    let (mut split, mut revenue) = best_in_window(p, coarse, COARSE_POINTS)?.ok_or(Error::EmptyFeasibleSet)?;
    let mut half_y = span / (COARSE_POINTS - 1) as f64;
    let mut half_b = 1.0 / (COARSE_POINTS - 1) as f64;
    for _ in 0..ZOOM_ROUNDS {
        let ly = (split.y_t / p.y0()).ln().max(0.0);
        let w = Window {
            ly_lo: (ly - half_y).max(0.0),
            ly_hi: ly + half_y,
            b_lo: (split.b1 - half_b).max(0.0),
            b_hi: (split.b1 + half_b).min(1.0),
        };
        if let Some((s, r)) = best_in_window(p, w, ZOOM_POINTS)? {
            if r > revenue {
                split = s;
                revenue = r;
            }
        }
        half_y /= ZOOM_FACTOR;
        half_b /= ZOOM_FACTOR;
    }
    let tol_y = 2.0 * half_y * ZOOM_FACTOR / (ZOOM_POINTS - 1) as f64;
    let tol_b = 2.0 * half_b * ZOOM_FACTOR / (ZOOM_POINTS - 1) as f64;
    let degenerate = (split.y_t / p.y0()).ln() <= tol_y && 1.0 - split.b1 <= tol_b;
    Ok(PmpSolution {
        split,
        pricing: pmp_prices(p, p.x0(), split)?,
        revenue,
        one_channel_revenue: one_channel_revenue(p)?,
        degenerate,
    })
}

/// True when revenue does not increase as the consumer threshold moves up
/// from `x₀` along `x_grid` log-spaced points (to where the consumer tail
/// mass is 1e-4).
pub fn pmp_verify_x0(p: &MarketParams, split: ChannelSplit, x_grid: usize) -> Result<bool> {
    if x_grid < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 grid points, got {x_grid}"
        )));
    }
    let x_cap = p.gamma().type_with_tail_mass(DEFAULT_TAIL_CUTOFF)?;
    let revenues: Vec<f64> = log_nodes(p.x0(), x_cap, x_grid)
        .iter()
        .map(|&x| pmp_revenue(p, x, split))
        .collect::<Result<_>>()?;
    let slack = 1e-10 * revenues[0].abs().max(1.0);
    Ok(revenues.windows(2).all(|w| w[0] >= w[1] - slack))
}

/// One row of a two-channel parameter scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmpScanRow {
    pub gamma: f64,
    pub beta: f64,
    pub lambda: f64,
    pub theta: f64,
    pub solution: PmpSolution,
}

/// Solves every `(γ, β)` pair in order, `γ` varying fastest.
pub fn scan(gammas: &[f64], betas: &[f64], lambda: f64, theta: f64) -> Result<Vec<PmpScanRow>> {
    let phi = PhiSpec::fractional_power(theta)?;
    let mut rows = Vec::with_capacity(gammas.len() * betas.len());
    for &beta in betas {
        for &gamma in gammas {
            let p = MarketParams::new(gamma, beta, lambda, 0.0, phi.clone())?;
            rows.push(PmpScanRow {
                gamma,
                beta,
                lambda,
                theta,
                solution: solve_pmp(&p)?,
            });
        }
    }
    Ok(rows)
}
