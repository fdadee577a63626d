//! Brute-force references for the analytic solvers: exhaustive search over
//! log-spaced threshold grids and Monte Carlo estimates of tail integrals.
//!
//! Nothing here calls into [`crate::solver`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{self, MarketParams, Thresholds};
use crate::powerlaw::Exponent;
use crate::valuefn::PhiSpec;

/// Grids stop where the tail mass drops below this.
pub const DEFAULT_TAIL_CUTOFF: f64 = 1e-4;
pub const DEFAULT_GRID_POINTS: usize = 200;
/// Squarings of `y_max/y₀` allowed while the argmax sits on the upper edge.
pub const MAX_Y_EXPANSIONS: usize = 6;
pub const MIN_MC_SAMPLES: usize = 1000;

/// How [`grid_revenue`] treats cells whose implied CP fee is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeePolicy {
    /// Skip them: the ISP only charges, never pays.
    #[default]
    NonNegativeFee,
    /// Keep them, valuing revenue at the implied (possibly negative) fee.
    AllowSubsidy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_points: usize,
    pub y_points: usize,
    pub x_max: f64,
    pub y_max: f64,
    pub fee_policy: FeePolicy,
    /// Widen the y-range when the best cell is the last one.
    pub expand_y: bool,
}

impl GridSpec {
    pub fn new(x_points: usize, y_points: usize, x_max: f64, y_max: f64) -> Self {
        Self {
            x_points,
            y_points,
            x_max,
            y_max,
            fee_policy: FeePolicy::default(),
            expand_y: true,
        }
    }

    /// 200×200, with each axis ending where its tail mass falls to 1e-4.
    pub fn default_for(p: &MarketParams) -> Result<Self> {
        Ok(Self::new(
            DEFAULT_GRID_POINTS,
            DEFAULT_GRID_POINTS,
            p.gamma().type_with_tail_mass(DEFAULT_TAIL_CUTOFF)?,
            p.beta().type_with_tail_mass(DEFAULT_TAIL_CUTOFF)?,
        ))
    }

    pub fn with_points(mut self, x_points: usize, y_points: usize) -> Self {
        self.x_points = x_points;
        self.y_points = y_points;
        self
    }

    pub fn with_fee_policy(mut self, policy: FeePolicy) -> Self {
        self.fee_policy = policy;
        self
    }

    pub fn with_expansion(mut self, expand_y: bool) -> Self {
        self.expand_y = expand_y;
        self
    }

    pub fn validate(&self, p: &MarketParams) -> Result<()> {
        if self.x_points < 2 || self.y_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 points per axis, got {}×{}",
                self.x_points, self.y_points
            )));
        }
        if !(self.x_max > p.x0() && self.x_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "x_max = {} must exceed x₀ = {}",
                self.x_max,
                p.x0()
            )));
        }
        if !(self.y_max > p.y0() && self.y_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "y_max = {} must exceed y₀ = {}",
                self.y_max,
                p.y0()
            )));
        }
        Ok(())
    }
}

/// `n` points from `lo` to `hi`, equally spaced in `ln`. Endpoints are exact.
pub fn log_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => lo * (step * i as f64).exp(),
        })
        .collect()
}

/// Best cell of a threshold grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub thresholds: Thresholds,
    pub value: f64,
    pub x_index: usize,
    pub y_index: usize,
    /// The grid actually searched, after any y-expansion.
    pub grid: GridSpec,
    pub x_log_step: f64,
    pub y_log_step: f64,
}

impl GridOptimum {
    /// True if `y` is at most one cell away from the argmax in `y`.
    pub fn y_within_one_cell(&self, y: f64) -> bool {
        (y / self.thresholds.y_t).ln().abs() <= self.y_log_step * (1.0 + 1e-9)
    }

    pub fn x_within_one_cell(&self, x: f64) -> bool {
        (x / self.thresholds.x_t).ln().abs() <= self.x_log_step * (1.0 + 1e-9)
    }
}

/// Lowest-index maximum over `Some` entries.
fn argmax(values: &[Option<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best
}

fn search<F>(p: &MarketParams, grid: GridSpec, objective: F) -> Result<GridOptimum>
where
    F: Fn(Thresholds) -> Result<Option<f64>> + Sync,
{
    grid.validate(p)?;
    let mut grid = grid;
    let mut expansions = 0;
    loop {
        let xs = log_nodes(p.x0(), grid.x_max, grid.x_points);
        let ys = log_nodes(p.y0(), grid.y_max, grid.y_points);
        let values: Vec<Option<f64>> = (0..xs.len() * ys.len())
            .into_par_iter()
            .map(|k| objective(Thresholds::new(xs[k / ys.len()], ys[k % ys.len()])))
            .collect::<Result<_>>()?;
        let (k, value) = argmax(&values).ok_or(Error::EmptyFeasibleSet)?;
        let (i, j) = (k / ys.len(), k % ys.len());
        if grid.expand_y && j == ys.len() - 1 && expansions < MAX_Y_EXPANSIONS {
            grid.y_max = p.y0() * (grid.y_max / p.y0()).powi(2);
            expansions += 1;
            continue;
        }
        return Ok(GridOptimum {
            thresholds: Thresholds::new(xs[i], ys[j]),
            value,
            x_index: i,
            y_index: j,
            grid,
            x_log_step: (grid.x_max / p.x0()).ln() / (grid.x_points - 1) as f64,
            y_log_step: (grid.y_max / p.y0()).ln() / (grid.y_points - 1) as f64,
        });
    }
}

/// Grid cell with the highest ISP revenue at the fees that make it marginal.
pub fn grid_revenue(p: &MarketParams, grid: GridSpec) -> Result<GridOptimum> {
    let policy = grid.fee_policy;
    search(p, grid, |th| match policy {
        FeePolicy::AllowSubsidy => market::threshold_revenue(p, th).map(Some),
        FeePolicy::NonNegativeFee => match market::revenue(p, th) {
            Ok(r) => Ok(Some(r)),
            Err(Error::InfeasibleThreshold { .. }) => Ok(None),
            Err(e) => Err(e),
        },
    })
}

/// Grid cell with the highest social welfare.
pub fn grid_welfare(p: &MarketParams, grid: GridSpec) -> Result<GridOptimum> {
    search(p, grid, |th| market::welfare(p, th).map(Some))
}

/// Best CP cutoff on a 1-D log grid when consumers pay nothing and all join.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineOptimum {
    pub y_t: f64,
    pub value: f64,
    pub index: usize,
    pub y_max: f64,
    pub log_step: f64,
}

impl LineOptimum {
    pub fn within_one_cell(&self, y: f64) -> bool {
        (y / self.y_t).ln().abs() <= self.log_step * (1.0 + 1e-9)
    }
}

/// Maximizes `λ√(T₀X̄)·√(∫_{y_t}y^{1−β}) − a·∫_{y_t}y^{1−β}` over `points`
/// log-spaced cutoffs on `[y₀, y_max]`, widening the range like
/// [`grid_revenue`] when the best cutoff is the last one.
pub fn grid_revenue_c0(p: &MarketParams, points: usize, y_max: f64) -> Result<LineOptimum> {
    if points < 2 || !(y_max > p.y0() && y_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need ≥ 2 points and y_max > y₀, got {points} points up to {y_max}"
        )));
    }
    let mut y_max = y_max;
    let mut expansions = 0;
    loop {
        let ys = log_nodes(p.y0(), y_max, points);
        let values: Vec<Option<f64>> = ys
            .par_iter()
            .map(|&y| market::cp_fee_revenue(p, y).map(Some))
            .collect::<Result<_>>()?;
        let (index, value) = argmax(&values).ok_or(Error::EmptyFeasibleSet)?;
        if index == points - 1 && expansions < MAX_Y_EXPANSIONS {
            y_max = p.y0() * (y_max / p.y0()).powi(2);
            expansions += 1;
            continue;
        }
        return Ok(LineOptimum {
            y_t: ys[index],
            value,
            index,
            y_max,
            log_step: (y_max / p.y0()).ln() / (points - 1) as f64,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl McEstimate {
    /// `|estimate − reference|` in standard errors.
    /// `|estimate − reference| / stderr`. A zero-variance estimate (proposal
    /// equal to the target) scores 0 when it agrees with `reference` to
    /// roundoff and infinity otherwise.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.estimate - reference).abs();
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff <= 1e-12 * reference.abs() {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Importance-sampled `∫_t^∞ x^{k−e} dx` from `n` draws of a Pareto
/// proposal with density `∝ x^{-e'}`, `e' = 1.5e − 2`. The proposal tail is
/// heavy enough for the weights to have finite variance when `k ≤ 1`.
pub fn mc_tail_moment(e: Exponent, t: f64, k: f64, n: usize, seed: u64) -> Result<McEstimate> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {n}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("lower limit must be positive, got {t}")));
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "moment order must lie in [0, 1], got {k}"
        )));
    }
    let ev = e.value();
    let ep = 1.5 * ev - 2.0;
    let norm = (ep - 1.0) * t.powf(ep - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Welford running mean and sum of squared deviations.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..n {
        let u = 1.0 - rng.random::<f64>();
        let x = t * u.powf(-1.0 / (ep - 1.0));
        let w = x.powf(k - ev + ep) / norm;
        let delta = w - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (w - mean);
    }
    let var = m2 / (n - 1) as f64;
    Ok(McEstimate {
        estimate: mean,
        stderr: (var / n as f64).sqrt(),
    })
}

/// Monte Carlo estimate of `∫_t^∞ x^{1−e} dx`.
pub fn mc_integral_check(e: Exponent, t: f64, n: usize, seed: u64) -> Result<McEstimate> {
    mc_tail_moment(e, t, 1.0, n, seed)
}

/// Ranges for randomized market draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketRanges {
    pub gamma: (f64, f64),
    pub beta: (f64, f64),
    pub theta: (f64, f64),
    pub lambda: (f64, f64),
}

impl Default for MarketRanges {
    fn default() -> Self {
        Self {
            gamma: (2.1, 3.5),
            beta: (2.1, 3.5),
            theta: (0.2, 0.8),
            lambda: (0.01, 1.0),
        }
    }
}

impl MarketRanges {
    /// A market with `φ(x) = x^θ` and the given CP cost, parameters drawn
    /// uniformly from the ranges.
    pub fn sample<R: Rng>(&self, rng: &mut R, a: f64) -> Result<MarketParams> {
        let gamma = rng.random_range(self.gamma.0..self.gamma.1);
        let beta = rng.random_range(self.beta.0..self.beta.1);
        let theta = rng.random_range(self.theta.0..self.theta.1);
        let lambda = rng.random_range(self.lambda.0..self.lambda.1);
        MarketParams::new(gamma, beta, lambda, a, PhiSpec::fractional_power(theta)?)
    }
}
