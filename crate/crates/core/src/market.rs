//! The two-sided market: traffic, speed, participant utilities, the prices
//! that make given types marginal, ISP revenue and social welfare, all as
//! functions of the participation thresholds `(x_t, y_t)`.
//!
//! Traffic between consumer type `x` and CP type `y` is proportional to
//! `x·y·speed`, with speed `T₀/T`. Solving the fixed point gives
//! `T = √(X̄·Ȳ·∫_{x_t} x^{1−γ} dx·∫_{y_t} y^{1−β} dy)`.

use crate::error::{Error, Result};
use crate::powerlaw::Exponent;
use crate::valuefn::PhiSpec;

/// Relative tolerance under which a negative implied CP fee is treated as
/// rounding noise around zero.
pub const FEE_ROUNDING: f64 = 1e-12;

/// The parameters of one market instance.
#[derive(Debug, Clone)]
pub struct MarketParams {
    gamma: Exponent,
    beta: Exponent,
    lambda: f64,
    a: f64,
    phi: PhiSpec,
}

impl MarketParams {
    /// `gamma`: consumer exponent, `beta`: CP exponent, `lambda`: CP utility
    /// per expected consumer, `a`: CP cost per unit type.
    pub fn new(gamma: f64, beta: f64, lambda: f64, a: f64, phi: PhiSpec) -> Result<Self> {
        let gamma = Exponent::new(gamma)?;
        let beta = Exponent::new(beta)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "λ must be positive and finite, got {lambda}"
            )));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be finite and ≥ 0, got {a}")));
        }
        phi.check_convergence(gamma)?;
        Ok(Self {
            gamma,
            beta,
            lambda,
            a,
            phi,
        })
    }

    /// Same market with a different CP cost.
    pub fn with_a(&self, a: f64) -> Result<Self> {
        Self::new(self.gamma.value(), self.beta.value(), self.lambda, a, self.phi.clone())
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.gamma.value(), self.beta.value(), lambda, self.a, self.phi.clone())
    }

    pub fn gamma(&self) -> Exponent {
        self.gamma
    }
    pub fn beta(&self) -> Exponent {
        self.beta
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    /// Consumer minimum type `x₀`.
    pub fn x0(&self) -> f64 {
        self.gamma.min_type()
    }
    /// CP minimum type `y₀`.
    pub fn y0(&self) -> f64 {
        self.beta.min_type()
    }
    /// `X̄`.
    pub fn mean_x(&self) -> f64 {
        self.gamma.mean()
    }
    /// `Ȳ`.
    pub fn mean_y(&self) -> f64 {
        self.beta.mean()
    }

    /// True when either exponent sits within 1e-6 of 2.
    pub fn is_near_critical(&self) -> bool {
        self.gamma.is_near_critical() || self.beta.is_near_critical()
    }

    /// Full participation `(x₀, y₀)`.
    pub fn full_participation(&self) -> Thresholds {
        Thresholds {
            x_t: self.x0(),
            y_t: self.y0(),
        }
    }
}

/// Lowest participating consumer and CP types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub x_t: f64,
    pub y_t: f64,
}

impl Thresholds {
    pub fn new(x_t: f64, y_t: f64) -> Self {
        Self { x_t, y_t }
    }
}

/// Posted fees: `b` per unit CP type, `c` flat consumer membership fee.
///
/// Fees returned by [`threshold_prices`] always have `b ≥ 0`. The solvers
/// report the fees implied by their optimal thresholds, where a negative `b`
/// means the CPs are subsidized; see [`Pricing::is_subsidy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pricing {
    pub b: f64,
    pub c: f64,
}

impl Pricing {
    pub fn is_subsidy(&self) -> bool {
        self.b < 0.0
    }
}

/// `∫_{x_t} x^{1−γ}`, `∫_{y_t} y^{1−β}` and `∫_{x_t} x^{-γ}` at the thresholds.
#[derive(Debug, Clone, Copy)]
struct Tails {
    fx: f64,
    fy: f64,
    mass_x: f64,
}

fn tails(p: &MarketParams, th: Thresholds) -> Result<Tails> {
    Ok(Tails {
        fx: p.gamma.tail_first_moment(th.x_t)?,
        fy: p.beta.tail_first_moment(th.y_t)?,
        mass_x: p.gamma.tail_mass(th.x_t)?,
    })
}

/// `T₀ = X̄·Ȳ`, the traffic with everyone participating.
pub fn base_traffic(p: &MarketParams) -> f64 {
    p.mean_x() * p.mean_y()
}

pub fn traffic(p: &MarketParams, th: Thresholds) -> Result<f64> {
    let t = tails(p, th)?;
    Ok((base_traffic(p) * t.fx * t.fy).sqrt())
}

/// Relative speed `T₀/T ≥ 1`.
pub fn speed(p: &MarketParams, th: Thresholds) -> Result<f64> {
    Ok(base_traffic(p) / traffic(p, th)?)
}

/// `K = √(T₀·∫_{y_t}y^{1−β}) / √(∫_{x_t}x^{1−γ})`: a consumer of type `x`
/// expects to like `K·x` CPs.
pub fn consumer_match_scale(p: &MarketParams, th: Thresholds) -> Result<f64> {
    let t = tails(p, th)?;
    Ok((base_traffic(p) * t.fy / t.fx).sqrt())
}

/// `λ·√(T₀·∫_{x_t}x^{1−γ}) / √(∫_{y_t}y^{1−β})`: gross CP utility per unit
/// type, before fees and costs.
pub fn cp_gross_value(p: &MarketParams, th: Thresholds) -> Result<f64> {
    let t = tails(p, th)?;
    Ok(p.lambda * (base_traffic(p) * t.fx / t.fy).sqrt())
}

fn check_participant(kind: &str, value: f64, threshold: f64) -> Result<()> {
    if value.is_nan() || value < threshold * (1.0 - 1e-12) {
        Err(Error::Domain(format!(
            "{kind} type {value} is below the threshold {threshold}"
        )))
    } else {
        Ok(())
    }
}

/// `φ(K·x) − c` for a participating consumer of type `x ≥ x_t`.
pub fn consumer_utility(p: &MarketParams, th: Thresholds, x: f64, c: f64) -> Result<f64> {
    check_participant("consumer", x, th.x_t)?;
    let k = consumer_match_scale(p, th)?;
    Ok(p.phi.value(k * x)? - c)
}

/// Per-unit-type CP margin `λ·√(T₀∫x^{1−γ})/√(∫y^{1−β}) − b − a`. Every CP
/// utility is this margin times `y`, so its sign is common to all CP types.
pub fn cp_margin(p: &MarketParams, th: Thresholds, b: f64) -> Result<f64> {
    Ok(cp_gross_value(p, th)? - b - p.a)
}

/// `(λ·√(T₀∫x^{1−γ})/√(∫y^{1−β}) − b − a)·y` for a participating CP `y ≥ y_t`.
pub fn cp_utility(p: &MarketParams, th: Thresholds, y: f64, b: f64) -> Result<f64> {
    check_participant("CP", y, th.y_t)?;
    Ok(cp_margin(p, th, b)? * y)
}

/// Fees that leave the types `x_t` and `y_t` exactly indifferent, without a
/// sign restriction on `b`.
pub fn implied_prices(p: &MarketParams, th: Thresholds) -> Result<Pricing> {
    let k = consumer_match_scale(p, th)?;
    let c = p.phi.value(k * th.x_t)?;
    let b = cp_gross_value(p, th)? - p.a;
    Ok(Pricing { b, c })
}

/// Nonnegative fees that make `(x_t, y_t)` the marginal types.
pub fn threshold_prices(p: &MarketParams, th: Thresholds) -> Result<Pricing> {
    let mut prices = implied_prices(p, th)?;
    if prices.b < 0.0 {
        let scale = (prices.b + p.a).abs().max(p.a);
        if prices.b < -FEE_ROUNDING * scale {
            return Err(Error::InfeasibleThreshold {
                x_t: th.x_t,
                y_t: th.y_t,
                b: prices.b,
            });
        }
        prices.b = 0.0;
    }
    Ok(prices)
}

fn revenue_from(p: &MarketParams, th: Thresholds, prices: Pricing) -> Result<f64> {
    let t = tails(p, th)?;
    Ok(prices.c * t.mass_x + prices.b * t.fy)
}

/// ISP revenue `c·∫_{x_t}x^{-γ} + b·∫_{y_t}y^{1−β}` under [`threshold_prices`].
pub fn revenue(p: &MarketParams, th: Thresholds) -> Result<f64> {
    revenue_from(p, th, threshold_prices(p, th)?)
}

/// Revenue under [`implied_prices`]; this is the objective the revenue
/// solvers maximize, and it may include a CP subsidy.
pub fn threshold_revenue(p: &MarketParams, th: Thresholds) -> Result<f64> {
    revenue_from(p, th, implied_prices(p, th)?)
}

/// Revenue with `c = 0` and all consumers in, as a function of `y_t` alone:
/// `λ√T₀·√X̄·√(∫_{y_t}y^{1−β}) − a·∫_{y_t}y^{1−β}`.
pub fn cp_fee_revenue(p: &MarketParams, y_t: f64) -> Result<f64> {
    let fy = p.beta.tail_first_moment(y_t)?;
    Ok(p.lambda * (base_traffic(p) * p.mean_x() * fy).sqrt() - p.a * fy)
}

/// Social welfare `S(x_t, y_t)`: consumer value plus CP value minus CP cost.
/// Fees are transfers and do not enter.
pub fn welfare(p: &MarketParams, th: Thresholds) -> Result<f64> {
    let t = tails(p, th)?;
    let k = (base_traffic(p) * t.fy / t.fx).sqrt();
    let consumer = p.phi.value_tail_integral(p.gamma, k, th.x_t)?;
    let cp = p.lambda * (base_traffic(p) * t.fx * t.fy).sqrt();
    Ok(consumer + cp - p.a * t.fy)
}
