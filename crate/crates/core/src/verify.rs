//! Seeded self-check suite: closed forms against quadrature and Monte
//! Carlo, analytic optima against grid search. The report text depends
//! only on the configuration.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::market::MarketParams;
use crate::oracle::{self, FeePolicy, GridSpec, MarketRanges};
use crate::pmp::{self, ChannelSplit};
use crate::powerlaw::Exponent;
use crate::quadrature::{integrate_tail, QuadConfig};
use crate::solver;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random parameter sets per check.
    pub cases: usize,
    /// Replaces every numeric tolerance when set.
    pub tolerance: Option<f64>,
    pub mc_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 20240101,
            cases: 5,
            tolerance: None,
            mc_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub offenders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub cases: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {} cases {}", self.seed, self.cases);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<22} max_dev={:.6e} tol={:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_deviation,
                c.tolerance
            );
            for o in &c.offenders {
                let _ = writeln!(out, "    {o}");
            }
        }
        let failed = self.failed().count();
        let _ = writeln!(
            out,
            "{} of {} checks passed",
            self.checks.len() - failed,
            self.checks.len()
        );
        out
    }
}

/// Collects deviations for one check.
struct Tally {
    name: &'static str,
    tolerance: f64,
    max_dev: f64,
    offenders: Vec<String>,
}

impl Tally {
    fn new(name: &'static str, default_tol: f64, cfg: &VerifyConfig) -> Self {
        Self {
            name,
            tolerance: cfg.tolerance.unwrap_or(default_tol),
            max_dev: 0.0,
            offenders: Vec::new(),
        }
    }

    /// Records a deviation; exceeding the tolerance (or NaN) adds an offender.
    fn record(&mut self, dev: f64, label: impl FnOnce() -> String) {
        if dev.is_nan() || dev > self.max_dev {
            self.max_dev = dev;
        }
        if dev.is_nan() || dev > self.tolerance {
            self.offenders.push(format!("{} (dev {:.3e})", label(), dev));
        }
    }

    /// Records a structural failure independent of the tolerance.
    fn fail(&mut self, msg: String) {
        self.offenders.push(msg);
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: self.offenders.is_empty(),
            max_deviation: self.max_dev,
            tolerance: self.tolerance,
            offenders: self.offenders,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn describe(p: &MarketParams) -> String {
    format!(
        "γ={:.6} β={:.6} λ={:.6} θ={:.6} a={:.6}",
        p.gamma().value(),
        p.beta().value(),
        p.lambda(),
        p.phi().theta().unwrap_or(f64::NAN),
        p.a()
    )
}

fn rng_for(cfg: &VerifyConfig, check: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(check.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn check_tail_integrals(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("tail_integrals", 1e-9, cfg);
    let mut rng = rng_for(cfg, 1);
    let q = QuadConfig::default();
    for _ in 0..cfg.cases {
        let e = Exponent::new(rng.random_range(2.1..4.0))?;
        let lo = e.min_type() * rng.random_range(1.0..50.0);
        let ev = e.value();
        let mass = integrate_tail(|x: f64| x.powf(-ev), lo, ev - 1.0, q)?.value;
        let moment = integrate_tail(|x: f64| x.powf(1.0 - ev), lo, ev - 2.0, q)?.value;
        t.record(rel(e.tail_mass(lo)?, mass), || format!("tail mass e={ev:.6} t={lo:.6}"));
        t.record(rel(e.tail_first_moment(lo)?, moment), || {
            format!("first moment e={ev:.6} t={lo:.6}")
        });
    }
    Ok(t.finish())
}

fn check_normalization(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("tail_mass_at_minimum", 1e-12, cfg);
    let mut rng = rng_for(cfg, 2);
    for _ in 0..cfg.cases {
        let e = Exponent::new(rng.random_range(2.0 + 1e-3..5.0))?;
        t.record((e.tail_mass(e.min_type())? - 1.0).abs(), || {
            format!("e={:.6}", e.value())
        });
    }
    Ok(t.finish())
}

fn check_value_integrals(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("value_integrals", 1e-9, cfg);
    let mut rng = rng_for(cfg, 3);
    let ranges = MarketRanges::default();
    let q = QuadConfig::default();
    for _ in 0..cfg.cases {
        let p = ranges.sample(&mut rng, 0.0)?;
        let phi = p.phi();
        let g = p.gamma();
        let ge = g.value();
        let z = rng.random_range(0.5..20.0);
        let closed = phi.phi_prime_tail_integral(g, z)?;
        let theta = phi.theta().unwrap_or(0.5);
        let quad = integrate_tail(
            |x: f64| phi.derivative(z * x).unwrap() * x.powf(1.0 - ge),
            p.x0(),
            ge - 1.0 - theta,
            q,
        )?
        .value;
        t.record(rel(closed, quad), || {
            format!("φ′ tail integral {} Z={z:.6}", describe(&p))
        });
        let k = rng.random_range(0.5..20.0);
        let x_t = p.x0() * rng.random_range(1.0..10.0);
        let closed = phi.value_tail_integral(g, k, x_t)?;
        let quad = integrate_tail(
            |x: f64| phi.value(k * x).unwrap() * x.powf(-ge),
            x_t,
            ge - 1.0 - theta,
            q,
        )?
        .value;
        t.record(rel(closed, quad), || {
            format!("φ tail integral {} K={k:.6}", describe(&p))
        });
    }
    Ok(t.finish())
}

fn check_monte_carlo(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("monte_carlo", 3.0, cfg);
    let mut rng = rng_for(cfg, 4);
    for i in 0..cfg.cases {
        let e = Exponent::new(rng.random_range(2.1..4.0))?;
        let lo = e.min_type() * rng.random_range(1.0..5.0);
        let seed = cfg.seed.wrapping_add(1000 + i as u64);
        let moment = oracle::mc_integral_check(e, lo, cfg.mc_samples, seed)?;
        t.record(moment.z_score(e.tail_first_moment(lo)?), || {
            format!("first moment e={:.6} t={lo:.6}", e.value())
        });
        let mass = oracle::mc_tail_moment(e, lo, 0.0, cfg.mc_samples, seed ^ 1)?;
        t.record(mass.z_score(e.tail_mass(lo)?), || {
            format!("tail mass e={:.6} t={lo:.6}", e.value())
        });
    }
    Ok(t.finish())
}

fn check_zero_fee_grid(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("zero_fee_revenue_grid", 1e-6, cfg);
    let mut rng = rng_for(cfg, 5);
    let ranges = MarketRanges::default();
    for _ in 0..cfg.cases {
        let base = ranges.sample(&mut rng, 0.0)?;
        let p = base.with_a(rng.random_range(0.0..1.5 * base.lambda() * base.mean_x()))?;
        let sol = solver::solve_revenue_c0(&p)?;
        let grid = oracle::grid_revenue_c0(&p, 2000, p.beta().type_with_tail_mass(oracle::DEFAULT_TAIL_CUTOFF)?)?;
        t.record(rel(grid.value, sol.revenue), || format!("revenue {}", describe(&p)));
        if !grid.within_one_cell(sol.thresholds.y_t) {
            t.fail(format!(
                "cutoff {} vs grid {} {}",
                sol.thresholds.y_t,
                grid.y_t,
                describe(&p)
            ));
        }
    }
    Ok(t.finish())
}

fn grid_dominance(cfg: &VerifyConfig, name: &'static str, check: u64, welfare: bool) -> Result<CheckResult> {
    let mut t = Tally::new(name, 1e-6, cfg);
    let mut rng = rng_for(cfg, check);
    let ranges = MarketRanges::default();
    for _ in 0..cfg.cases {
        let base = ranges.sample(&mut rng, 0.0)?;
        let zeta = solver::constants(&base)?.zeta;
        let p = base.with_a(rng.random_range(0.0..3.0 * zeta))?;
        let grid = GridSpec::default_for(&p)?.with_fee_policy(FeePolicy::AllowSubsidy);
        let (sol, best) = if welfare {
            (solver::solve_social(&p)?, oracle::grid_welfare(&p, grid)?)
        } else {
            (solver::solve_revenue(&p)?, oracle::grid_revenue(&p, grid)?)
        };
        let analytic = if welfare { sol.welfare } else { sol.revenue };
        // Only a shortfall of the analytic optimum counts.
        t.record(((best.value - analytic) / analytic.abs()).max(0.0), || describe(&p));
        if best.x_index != 0 {
            t.fail(format!("grid argmax x index {} {}", best.x_index, describe(&p)));
        }
        if !best.y_within_one_cell(sol.thresholds.y_t) {
            t.fail(format!(
                "cutoff {} vs grid {} {}",
                sol.thresholds.y_t,
                best.thresholds.y_t,
                describe(&p)
            ));
        }
    }
    Ok(t.finish())
}

fn check_cutoff_order(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("cutoff_order", 0.0, cfg);
    t.tolerance = 0.0;
    let mut rng = rng_for(cfg, 8);
    let ranges = MarketRanges::default();
    for _ in 0..cfg.cases {
        let base = ranges.sample(&mut rng, 0.0)?;
        let zeta = solver::constants(&base)?.zeta;
        let p = base.with_a(zeta * (1.0 + 4.0 * (1.0 - rng.random::<f64>())))?;
        let c = solver::compare_cutoffs(&p)?;
        t.record((1e-9 - (c.y_star - c.y_hat)).max(0.0), || {
            format!("ŷ={} y*={} {}", c.y_hat, c.y_star, describe(&p))
        });
        for y in solver::log_grid(p.y0(), p.y0() * 1e4, 50) {
            let (g, h) = (solver::g(&p, y)?, solver::h(&p, y)?);
            t.record((1e-9 * h.abs().max(1.0) - (h - g)).max(0.0), || {
                format!("g ≥ h at y={y} {}", describe(&p))
            });
        }
    }
    Ok(t.finish())
}

fn check_transition(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("transition", 1e-8, cfg);
    let mut rng = rng_for(cfg, 9);
    let ranges = MarketRanges::default();
    for _ in 0..cfg.cases {
        let p = ranges.sample(&mut rng, 0.0)?;
        match solver::find_transition(&p) {
            Ok(tr) => {
                t.record(tr.gap_at_root.abs(), || format!("ā={} {}", tr.a_bar, describe(&p)));
                if tr.scan_sign_changes != 1 {
                    t.fail(format!(
                        "{} sign changes in scan {}",
                        tr.scan_sign_changes,
                        describe(&p)
                    ));
                }
            }
            Err(e) => t.fail(format!("{e} {}", describe(&p))),
        }
    }
    Ok(t.finish())
}

fn check_two_channel(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut t = Tally::new("two_channel", 1e-12, cfg);
    let mut rng = rng_for(cfg, 10);
    let ranges = MarketRanges {
        lambda: (0.005, 0.2),
        ..MarketRanges::default()
    };
    for _ in 0..cfg.cases {
        let p = ranges.sample(&mut rng, 0.0)?;
        let y_t = p.y0() * rng.random_range(1.0f64..1e3);
        let s = p.beta().tail_first_moment(y_t)? / p.mean_y();
        let split = ChannelSplit::new((s + (1.0 - s) * rng.random::<f64>()).min(1.0), y_t)?;
        if !pmp::pmp_verify_x0(&p, split, 100)? {
            t.fail(format!(
                "revenue rises with x_t at B₁={} y_t={} {}",
                split.b1,
                split.y_t,
                describe(&p)
            ));
        }
        let sol = pmp::solve_pmp(&p)?;
        t.record(
            ((sol.one_channel_revenue - sol.revenue) / sol.one_channel_revenue).max(0.0),
            || describe(&p),
        );
        let (pay, free) = pmp::marginal_cp_utilities(&p, p.x0(), split, pmp::pmp_prices(&p, p.x0(), split)?)?;
        if (pay - free).abs() >= 1e-10 * pay.abs().max(1.0) {
            t.fail(format!(
                "marginal CP not indifferent ({pay} vs {free}) {}",
                describe(&p)
            ));
        }
    }
    Ok(t.finish())
}

/// Runs every check. Errors from the library itself abort the run.
pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let checks = vec![
        check_tail_integrals(cfg)?,
        check_normalization(cfg)?,
        check_value_integrals(cfg)?,
        check_monte_carlo(cfg)?,
        check_zero_fee_grid(cfg)?,
        grid_dominance(cfg, "revenue_grid", 6, false)?,
        grid_dominance(cfg, "welfare_grid", 7, true)?,
        check_cutoff_order(cfg)?,
        check_transition(cfg)?,
        check_two_channel(cfg)?,
    ];
    Ok(VerifyReport {
        seed: cfg.seed,
        cases: cfg.cases,
        checks,
    })
}
