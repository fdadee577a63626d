//! Normalized power-law type distributions with density `x^{-e}` on
//! `[t₀, ∞)`, where the minimum type `t₀ = (1/(e−1))^{1/(e−1)}` makes the
//! density integrate to one.

use std::fmt;

use crate::error::{Error, Result};

/// Exponents within this distance of 2 are accepted but flagged: the means
/// scale like `1/(e−2)` and every downstream quantity becomes ill-conditioned.
pub const NEAR_CRITICAL_WIDTH: f64 = 1e-6;

/// Relative slack when checking `t ≥ t₀`, so thresholds computed from the
/// minimum type by a different route are not rejected for rounding.
const MIN_TYPE_SLACK: f64 = 1e-12;

/// A power-law exponent. Always strictly greater than 2 so the mean exists.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 2.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "power-law exponent must be finite and > 2, got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when the exponent lies in `(2, 2 + 1e-6]`.
    pub fn is_near_critical(self) -> bool {
        self.0 <= 2.0 + NEAR_CRITICAL_WIDTH
    }

    /// The minimum type `t₀`.
    pub fn min_type(self) -> f64 {
        let k = self.0 - 1.0;
        (1.0 / k).powf(1.0 / k)
    }

    fn check_type(self, t: f64) -> Result<()> {
        let t0 = self.min_type();
        if t.is_nan() || t < t0 * (1.0 - MIN_TYPE_SLACK) {
            Err(Error::Domain(format!(
                "type {t} is below the minimum type {t0} for exponent {}",
                self.0
            )))
        } else {
            Ok(())
        }
    }

    /// `∫_t^∞ x^{-e} dx = t^{1−e}/(e−1)`, the population share of types above `t`.
    pub fn tail_mass(self, t: f64) -> Result<f64> {
        self.check_type(t)?;
        Ok(self.tail_mass_unchecked(t))
    }

    /// `∫_t^∞ x^{1−e} dx = t^{2−e}/(e−2)`. At the minimum type this is the mean.
    pub fn tail_first_moment(self, t: f64) -> Result<f64> {
        self.check_type(t)?;
        Ok(self.tail_first_moment_unchecked(t))
    }

    /// `∫_lo^hi x^{1−e} dx` for `t₀ ≤ lo ≤ hi`; `hi` may be infinite.
    pub fn first_moment_between(self, lo: f64, hi: f64) -> Result<f64> {
        self.check_type(lo)?;
        if hi.is_nan() || hi < lo {
            return Err(Error::Domain(format!("interval [{lo}, {hi}] is empty")));
        }
        let e2 = self.0 - 2.0;
        // lo^{2−e} − hi^{2−e} = lo^{2−e}·(1 − (hi/lo)^{2−e}); exp_m1 keeps
        // precision for narrow intervals.
        let ratio_term = -(-e2 * (hi / lo).ln()).exp_m1();
        Ok(lo.powf(-e2) * ratio_term / e2)
    }

    /// The distribution mean, `tail_first_moment` at the minimum type.
    pub fn mean(self) -> f64 {
        self.tail_first_moment_unchecked(self.min_type())
    }

    pub(crate) fn tail_mass_unchecked(self, t: f64) -> f64 {
        t.powf(1.0 - self.0) / (self.0 - 1.0)
    }

    pub(crate) fn tail_first_moment_unchecked(self, t: f64) -> f64 {
        t.powf(2.0 - self.0) / (self.0 - 2.0)
    }

    /// The type whose tail mass equals `mass` (inverse of `tail_mass`).
    pub fn type_with_tail_mass(self, mass: f64) -> Result<f64> {
        if !(mass > 0.0 && mass <= 1.0) {
            return Err(Error::Domain(format!("tail mass must lie in (0, 1], got {mass}")));
        }
        Ok((mass * (self.0 - 1.0)).powf(1.0 / (1.0 - self.0)))
    }

    /// The type whose tail first moment equals `moment`.
    pub fn type_with_tail_first_moment(self, moment: f64) -> Result<f64> {
        if !(moment > 0.0 && moment <= self.mean() * (1.0 + MIN_TYPE_SLACK)) {
            return Err(Error::Domain(format!(
                "tail first moment must lie in (0, {}], got {moment}",
                self.mean()
            )));
        }
        let t = (moment * (self.0 - 2.0)).powf(1.0 / (2.0 - self.0));
        Ok(t.max(self.min_type()))
    }

    /// Inverse-CDF draw: maps `u ∈ (0, 1)` to `t₀·u^{-1/(e−1)}`.
    pub fn sample(self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("uniform variate must lie in (0, 1), got {u}")));
        }
        Ok(self.min_type() * u.powf(-1.0 / (self.0 - 1.0)))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
