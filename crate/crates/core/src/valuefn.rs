//! The consumer value function `φ`, which turns the expected number of liked
//! CPs into utility, together with the integrals of `φ` and `φ′` against the
//! consumer density that the welfare conditions need.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::powerlaw::Exponent;
use crate::quadrature::{integrate_tail, QuadConfig};

/// Number of log-spaced points used to sanity-check a custom `φ`.
pub const SHAPE_CHECK_POINTS: usize = 64;
/// Upper end of the shape-check grid.
pub const SHAPE_CHECK_MAX: f64 = 1e3;

/// Lower end of the shape-check grid: a tenth of the smallest minimum type
/// any exponent can produce (`e^{-1/e}`, reached at exponent `1 + e`).
pub fn shape_check_min() -> f64 {
    (-1.0 / std::f64::consts::E).exp() / 10.0
}

type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied concave value function with its exact derivative.
#[derive(Clone)]
pub struct CustomPhi {
    name: String,
    value: RealMap,
    derivative: RealMap,
}

impl fmt::Debug for CustomPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPhi")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum PhiSpec {
    /// `φ(r) = r^θ` with `0 < θ < 1`.
    FractionalPower {
        theta: f64,
    },
    Custom(CustomPhi),
}

impl PhiSpec {
    pub fn fractional_power(theta: f64) -> Result<Self> {
        if theta.is_finite() && theta > 0.0 && theta < 1.0 {
            Ok(PhiSpec::FractionalPower { theta })
        } else {
            Err(Error::InvalidParameter(format!(
                "fractional power exponent must lie in (0, 1), got {theta}"
            )))
        }
    }

    /// `φ(r) = √r`.
    pub fn sqrt() -> Self {
        PhiSpec::FractionalPower { theta: 0.5 }
    }

    /// Builds a custom `φ` after checking on a log grid that `φ(0) ≥ 0`, `φ`
    /// is increasing, `φ′` is positive and non-increasing, and `rφ′(r) ≤ φ(r)`.
    pub fn custom<V, D>(name: impl Into<String>, value: V, derivative: D) -> Result<Self>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let phi0 = value(0.0);
        if !(phi0 >= 0.0 && phi0.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name}: φ(0) = {phi0} must be ≥ 0")));
        }
        let lo = shape_check_min();
        let ratio = (SHAPE_CHECK_MAX / lo).ln() / (SHAPE_CHECK_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..SHAPE_CHECK_POINTS).map(|i| lo * (ratio * i as f64).exp()).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| value(r)).collect();
        let ders: Vec<f64> = grid.iter().map(|&r| derivative(r)).collect();
        let slack = 1e-12;
        for i in 0..grid.len() {
            let (r, v, d) = (grid[i], vals[i], ders[i]);
            if !(v.is_finite() && d.is_finite() && d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name}: φ({r}) = {v}, φ′({r}) = {d}; need finite values and φ′ > 0"
                )));
            }
            if r * d > v + slack * v.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name}: r·φ′(r) = {} exceeds φ(r) = {v} at r = {r}",
                    r * d
                )));
            }
            if i > 0 {
                if v < vals[i - 1] - slack * v.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!("{name}: φ decreases near r = {r}")));
                }
                if d > ders[i - 1] + slack * d.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{name}: φ′ increases near r = {r} (φ not concave)"
                    )));
                }
            }
        }
        Ok(PhiSpec::Custom(CustomPhi {
            name,
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }))
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            PhiSpec::FractionalPower { theta } => Some(*theta),
            PhiSpec::Custom(_) => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            PhiSpec::FractionalPower { theta } => format!("x^{theta}"),
            PhiSpec::Custom(c) => c.name.clone(),
        }
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("φ is defined for r ≥ 0, got {r}")));
        }
        Ok(self.value_unchecked(r))
    }

    pub fn derivative(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("φ′ is defined for r > 0, got {r}")));
        }
        Ok(self.derivative_unchecked(r))
    }

    pub(crate) fn value_unchecked(&self, r: f64) -> f64 {
        match self {
            PhiSpec::FractionalPower { theta } => r.powf(*theta),
            PhiSpec::Custom(c) => (c.value)(r),
        }
    }

    pub(crate) fn derivative_unchecked(&self, r: f64) -> f64 {
        match self {
            PhiSpec::FractionalPower { theta } => theta * r.powf(theta - 1.0),
            PhiSpec::Custom(c) => (c.derivative)(r),
        }
    }

    /// Checks that `∫ φ(Kx)x^{-γ}` and `∫ φ′(Zx)x^{1−γ}` converge for `gamma`.
    pub fn check_convergence(&self, gamma: Exponent) -> Result<()> {
        if let PhiSpec::FractionalPower { theta } = self {
            if gamma.value() <= theta + 1.0 {
                return Err(Error::Divergence(format!(
                    "γ = {gamma} must exceed θ + 1 = {}",
                    theta + 1.0
                )));
            }
        }
        Ok(())
    }

    /// `∫_{x₀}^∞ φ′(Zx)·x^{1−γ} dx` with `x₀` the consumer minimum type.
    pub fn phi_prime_tail_integral(&self, gamma: Exponent, z: f64) -> Result<f64> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!("Z must be positive and finite, got {z}")));
        }
        self.check_convergence(gamma)?;
        let g = gamma.value();
        let x0 = gamma.min_type();
        match self {
            PhiSpec::FractionalPower { theta } => {
                Ok(theta * z.powf(theta - 1.0) * x0.powf(1.0 + theta - g) / (g - theta - 1.0))
            }
            PhiSpec::Custom(c) => {
                let r = integrate_tail(
                    |x| (c.derivative)(z * x) * x.powf(1.0 - g),
                    x0,
                    g - 2.0,
                    QuadConfig::default(),
                )?;
                Ok(r.value)
            }
        }
    }

    /// `∫_{x_t}^∞ φ(Kx)·x^{-γ} dx`, the consumer side of social welfare.
    pub fn value_tail_integral(&self, gamma: Exponent, k: f64, x_t: f64) -> Result<f64> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("scale K must be finite and ≥ 0, got {k}")));
        }
        gamma.tail_mass(x_t)?;
        self.check_convergence(gamma)?;
        let g = gamma.value();
        match self {
            PhiSpec::FractionalPower { theta } => Ok(k.powf(*theta) * x_t.powf(1.0 + theta - g) / (g - theta - 1.0)),
            PhiSpec::Custom(c) => {
                let r = integrate_tail(|x| (c.value)(k * x) * x.powf(-g), x_t, g - 2.0, QuadConfig::default())?;
                Ok(r.value)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad_phi_prime(phi: &PhiSpec, gamma: Exponent, z: f64) -> f64 {
        let g = gamma.value();
        integrate_tail(
            |x| phi.derivative_unchecked(z * x) * x.powf(1.0 - g),
            gamma.min_type(),
            g - 2.0,
            QuadConfig::default(),
        )
        .unwrap()
        .value
    }

    fn log1p_phi() -> PhiSpec {
        PhiSpec::custom("ln(1+r)", |r: f64| r.ln_1p(), |r: f64| 1.0 / (1.0 + r)).unwrap()
    }

    #[test]
    fn sqrt_values() {
        let phi = PhiSpec::sqrt();
        assert_eq!(phi.value(4.0).unwrap(), 2.0);
        assert_eq!(phi.value(0.0).unwrap(), 0.0);
        assert_eq!(phi.derivative(1.0).unwrap(), 0.5);
        assert_eq!(phi.derivative(4.0).unwrap(), 0.25);
    }

    #[test]
    fn domain_errors() {
        let phi = PhiSpec::sqrt();
        assert!(matches!(phi.value(-1.0), Err(Error::Domain(_))));
        assert!(matches!(phi.derivative(0.0), Err(Error::Domain(_))));
        assert!(PhiSpec::fractional_power(1.0).is_err());
        assert!(PhiSpec::fractional_power(0.0).is_err());
    }

    #[test]
    fn custom_rejects_convex_and_bad_shapes() {
        assert!(PhiSpec::custom("r^2", |r: f64| r * r, |r: f64| 2.0 * r).is_err());
        assert!(PhiSpec::custom("neg", |r: f64| r.sqrt() - 1.0, |r: f64| 0.5 / r.sqrt()).is_err());
        assert!(PhiSpec::custom("linear", |r: f64| r, |_| 1.0).is_ok());
        assert!(log1p_phi().theta().is_none());
    }

    #[test]
    fn custom_derivative_matches_finite_difference() {
        let phi = log1p_phi();
        for i in 0..20 {
            let r = 0.1 * 1.4f64.powi(i);
            let h = 1e-5 * r;
            let fd = (phi.value(r + h).unwrap() - phi.value(r - h).unwrap()) / (2.0 * h);
            let d = phi.derivative(r).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d, "r={r}: {fd} vs {d}");
        }
    }

    #[test]
    fn phi_prime_integral_reference_value() {
        // γ = β = 2.5, Z = Ȳ: the quadrature oracle gives √3/4.
        let gamma = Exponent::new(2.5).unwrap();
        let z = Exponent::new(2.5).unwrap().mean();
        let phi = PhiSpec::sqrt();
        let closed = phi.phi_prime_tail_integral(gamma, z).unwrap();
        let quad = quad_phi_prime(&phi, gamma, z);
        assert!((quad - 0.433_012_701_892_219_3).abs() < 1e-10);
        assert!((closed - quad).abs() < 1e-9 * quad);
    }

    #[test]
    fn phi_prime_integral_errors() {
        // γ > 2 > θ + 1 always holds for a valid exponent, so only Z can fail.
        let phi = PhiSpec::fractional_power(0.9).unwrap();
        let gamma = Exponent::new(2.5).unwrap();
        assert!(phi.check_convergence(gamma).is_ok());
        assert!(matches!(phi.phi_prime_tail_integral(gamma, 0.0), Err(Error::Domain(_))));
        assert!(phi.phi_prime_tail_integral(gamma, 1e30).unwrap() < 1e-2);
    }

    #[test]
    fn custom_integrals_use_quadrature() {
        let phi = log1p_phi();
        let gamma = Exponent::new(2.6).unwrap();
        let v = phi.phi_prime_tail_integral(gamma, 1.7).unwrap();
        assert!((v - quad_phi_prime(&phi, gamma, 1.7)).abs() < 1e-12);
        let w = phi.value_tail_integral(gamma, 1.3, gamma.min_type() * 2.0).unwrap();
        assert!(w > 0.0);
    }

    #[test]
    fn value_integral_closed_form_matches_quadrature() {
        let phi = PhiSpec::fractional_power(0.3).unwrap();
        let gamma = Exponent::new(2.4).unwrap();
        let x_t = gamma.min_type() * 1.7;
        let closed = phi.value_tail_integral(gamma, 2.2, x_t).unwrap();
        let quad = integrate_tail(|x| (2.2 * x).powf(0.3) * x.powf(-2.4), x_t, 1.1, QuadConfig::default())
            .unwrap()
            .value;
        assert!((closed - quad).abs() < 1e-9 * quad);
    }

    proptest! {
        #[test]
        fn closed_form_matches_quadrature(theta in 0.05f64..0.95, gap in 0.2f64..2.5, z in 0.05f64..50.0) {
            let g = (theta + 1.0).max(2.0) + gap;
            let gamma = Exponent::new(g).unwrap();
            let phi = PhiSpec::fractional_power(theta).unwrap();
            let closed = phi.phi_prime_tail_integral(gamma, z).unwrap();
            let quad = quad_phi_prime(&phi, gamma, z);
            prop_assert!((closed - quad).abs() <= 1e-9 * closed);
        }

        #[test]
        fn strictly_decreasing_in_z(theta in 0.05f64..0.95, g in 2.1f64..4.0, z in 0.05f64..50.0, d in 0.01f64..2.0) {
            let gamma = Exponent::new(g.max(theta + 1.05)).unwrap();
            let phi = PhiSpec::fractional_power(theta).unwrap();
            prop_assert!(phi.phi_prime_tail_integral(gamma, z).unwrap()
                > phi.phi_prime_tail_integral(gamma, z * (1.0 + d)).unwrap());
        }

        #[test]
        fn comparison_gap_is_positive(theta in 0.05f64..0.95, g in 2.05f64..4.0, z in 0.05f64..50.0) {
            // I(Z) − ((γ−2)/(γ−1))·φ′(Z·x₀)·X̄ = θZ^{θ−1}x₀^{1+θ−γ}(1/(γ−θ−1) − 1/(γ−1))
            let gamma = Exponent::new(g).unwrap();
            let phi = PhiSpec::fractional_power(theta).unwrap();
            let x0 = gamma.min_type();
            let lhs = phi.phi_prime_tail_integral(gamma, z).unwrap()
                - (g - 2.0) / (g - 1.0) * phi.derivative(z * x0).unwrap() * gamma.mean();
            let rhs = theta * z.powf(theta - 1.0) * x0.powf(1.0 + theta - g)
                * (1.0 / (g - theta - 1.0) - 1.0 / (g - 1.0));
            prop_assert!(lhs > 0.0);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300) + 1e-14);
        }

        #[test]
        fn value_is_monotone(theta in 0.05f64..0.95, r in 0.0f64..100.0, d in 0.0f64..10.0) {
            let phi = PhiSpec::fractional_power(theta).unwrap();
            prop_assert!(phi.value(r).unwrap() <= phi.value(r + d).unwrap());
        }
    }
}
