use std::fmt::Write as _;
use std::path::PathBuf;

use netmarket::pmp::{self, PmpScanRow};
use netmarket::solver::{self, RegimeSolution, WelfareComparison};
use netmarket::verify::{self, VerifyConfig, VerifyReport};
use netmarket::{MarketParams, PhiSpec};
use rayon::prelude::*;

use crate::config::{RunConfig, Sweep};
use crate::output::{emit, num, Table};
use crate::svg::{line_chart, Series};
use crate::CliError;

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_CURVE_RANGE: (f64, f64) = (1.01, 2.5);
pub const DEFAULT_CURVE_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolveMode {
    /// Revenue-optimal consumer and CP fees.
    Revenue,
    /// Revenue-optimal CP fee with the consumer fee fixed at zero.
    RevenueC0,
    /// Welfare-maximizing thresholds.
    Social,
}

impl SolveMode {
    fn label(self) -> &'static str {
        match self {
            SolveMode::Revenue => "revenue",
            SolveMode::RevenueC0 => "revenue-c0",
            SolveMode::Social => "social",
        }
    }
}

fn market(cfg: &RunConfig, default_lambda: f64) -> Result<MarketParams, CliError> {
    let phi = PhiSpec::fractional_power(cfg.theta())?;
    Ok(MarketParams::new(
        cfg.gamma(),
        cfg.beta(),
        cfg.lambda.unwrap_or(default_lambda),
        cfg.a(),
        phi,
    )?)
}

pub fn solve(cfg: &RunConfig, mode: SolveMode) -> Result<(), CliError> {
    let p = market(cfg, DEFAULT_LAMBDA)?;
    let k = solver::constants(&p)?;
    let s: RegimeSolution = match mode {
        SolveMode::Revenue => solver::solve_revenue(&p)?,
        SolveMode::RevenueC0 => solver::solve_revenue_c0(&p)?,
        SolveMode::Social => solver::solve_social(&p)?,
    };
    let fields: [(&str, String); 11] = [
        ("mode", mode.label().to_string()),
        ("regime", s.regime.to_string()),
        ("x_t", num(s.thresholds.x_t)),
        ("y_t", num(s.thresholds.y_t)),
        ("b", num(s.pricing.b)),
        ("c", num(s.pricing.c)),
        ("revenue", num(s.revenue)),
        ("welfare", num(s.welfare)),
        ("zeta", num(k.zeta)),
        ("eta", num(k.eta)),
        ("subsidy", s.pricing.is_subsidy().to_string()),
    ];
    let mut text = String::new();
    for (name, value) in &fields {
        let _ = writeln!(text, "{name:<9}{value:>24}");
    }
    if !s.prices_unique {
        text.push_str("prices are the largest pair inducing these thresholds\n");
    }
    emit(None, text.as_bytes())?;
    if let Some(path) = &cfg.out {
        let header: Vec<&str> = fields.iter().map(|f| f.0).collect();
        let mut t = Table::new(&header)?;
        t.row(fields.iter().map(|f| f.1.as_str()))?;
        emit(Some(path), &t.into_bytes()?)?;
    }
    Ok(())
}

pub fn welfare_curve(cfg: &RunConfig, svg: Option<PathBuf>) -> Result<(), CliError> {
    let p = market(cfg, DEFAULT_LAMBDA)?.with_a(0.0)?;
    let zeta = solver::constants(&p)?.zeta;
    let sweep = Sweep::new(
        cfg.a_min.unwrap_or(DEFAULT_CURVE_RANGE.0 * zeta),
        cfg.a_max.unwrap_or(DEFAULT_CURVE_RANGE.1 * zeta),
        cfg.a_steps.unwrap_or(DEFAULT_CURVE_STEPS),
    )?;
    let grid: Vec<f64> = (0..sweep.steps)
        .map(|i| match i {
            _ if i == sweep.steps - 1 => sweep.max,
            _ => sweep.min + (sweep.max - sweep.min) * i as f64 / (sweep.steps - 1) as f64,
        })
        .collect();
    let rows: Vec<WelfareComparison> = grid
        .par_iter()
        .map(|&a| solver::compare_welfare(&p, a))
        .collect::<Result<_, _>>()?;
    let transition = solver::find_transition(&p)?;

    let mut t = Table::new(&[
        "a",
        "welfare_neutral",
        "welfare_revenue_opt",
        "welfare_social_opt",
        "y_star",
        "y_hat",
    ])?;
    for r in &rows {
        t.row([
            num(r.a),
            num(r.neutral),
            num(r.revenue_opt),
            num(r.social_opt),
            num(r.y_star),
            num(r.y_hat),
        ])?;
    }
    t.comment(format!("a_bar={}", num(transition.a_bar)));
    emit(cfg.out.as_deref(), &t.into_bytes()?)?;

    if let Some(path) = svg {
        let series = |name: &str, f: fn(&WelfareComparison) -> f64| Series {
            name: name.to_string(),
            points: rows.iter().map(|r| (r.a, f(r))).collect(),
        };
        let chart = line_chart(
            "Social welfare against CP cost",
            "a",
            "welfare",
            &[
                series("net neutral", |r| r.neutral),
                series("revenue optimal", |r| r.revenue_opt),
                series("social optimum", |r| r.social_opt),
            ],
        );
        emit(Some(&path), chart.as_bytes())?;
    }
    Ok(())
}

pub fn transition(cfg: &RunConfig) -> Result<(), CliError> {
    let p = market(cfg, DEFAULT_LAMBDA)?.with_a(0.0)?;
    let tr = solver::find_transition(&p)?;
    let text = format!(
        "zeta     {:>24}\na_bar    {:>24}\ngap      {:>24}\nchanges  {:>24}\n",
        num(tr.zeta),
        num(tr.a_bar),
        num(tr.gap_at_root),
        tr.scan_sign_changes
    );
    emit(None, text.as_bytes())?;
    if let Some(path) = &cfg.out {
        let mut t = Table::new(&[
            "gamma",
            "beta",
            "lambda",
            "theta",
            "zeta",
            "a_bar",
            "gap_at_root",
            "scan_sign_changes",
        ])?;
        t.row([
            num(cfg.gamma()),
            num(cfg.beta()),
            num(p.lambda()),
            num(cfg.theta()),
            num(tr.zeta),
            num(tr.a_bar),
            num(tr.gap_at_root),
            tr.scan_sign_changes.to_string(),
        ])?;
        emit(Some(path), &t.into_bytes()?)?;
    }
    Ok(())
}

pub fn pmp(
    cfg: &RunConfig,
    gammas: Option<Vec<f64>>,
    betas: Option<Vec<f64>>,
    svg: Option<PathBuf>,
) -> Result<(), CliError> {
    if cfg.a() != 0.0 {
        return Err(CliError::Input(format!(
            "two-channel pricing needs a = 0, got a = {}",
            cfg.a()
        )));
    }
    let gammas = gammas.unwrap_or_else(|| vec![cfg.gamma()]);
    let betas = betas.unwrap_or_else(|| vec![cfg.beta()]);
    let lambda = cfg.lambda.unwrap_or(pmp::DEFAULT_LAMBDA);
    let rows: Vec<PmpScanRow> = pmp::scan(&gammas, &betas, lambda, cfg.theta())?;

    let mut t = Table::new(&[
        "gamma",
        "beta",
        "lambda",
        "theta",
        "B1",
        "y_t",
        "revenue",
        "revenue_one_channel",
        "degenerate",
    ])?;
    for r in &rows {
        let s = &r.solution;
        t.row([
            num(r.gamma),
            num(r.beta),
            num(r.lambda),
            num(r.theta),
            num(s.split.b1),
            num(s.split.y_t),
            num(s.revenue),
            num(s.one_channel_revenue),
            s.degenerate.to_string(),
        ])?;
    }
    emit(cfg.out.as_deref(), &t.into_bytes()?)?;

    if let Some(path) = svg {
        let series: Vec<Series> = betas
            .iter()
            .map(|&beta| Series {
                name: format!("β = {beta}"),
                points: rows
                    .iter()
                    .filter(|r| r.beta == beta)
                    .map(|r| (r.gamma, r.solution.split.b1))
                    .collect(),
            })
            .collect();
        let chart = line_chart("Optimal paid-channel share", "γ", "B1", &series);
        emit(Some(&path), chart.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub cases: Option<usize>,
    pub tolerance: Option<f64>,
    pub mc_samples: Option<usize>,
}

/// Runs the check suite and returns the report; the printed report is
/// exactly [`VerifyReport::render`].
pub fn verify_report(cfg: &RunConfig, opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let defaults = VerifyConfig::default();
    if let Some(tol) = opts.tolerance {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Input(format!("tolerance must be positive, got {tol}")));
        }
    }
    let vc = VerifyConfig {
        seed: cfg.seed.unwrap_or(defaults.seed),
        cases: opts.cases.unwrap_or(defaults.cases),
        tolerance: opts.tolerance,
        mc_samples: opts.mc_samples.unwrap_or(defaults.mc_samples),
    };
    if vc.cases == 0 {
        return Err(CliError::Input("need at least one case per check".into()));
    }
    if vc.mc_samples < netmarket::oracle::MIN_MC_SAMPLES {
        return Err(CliError::Input(format!(
            "need at least {} Monte Carlo samples, got {}",
            netmarket::oracle::MIN_MC_SAMPLES,
            vc.mc_samples
        )));
    }
    Ok(verify::run(&vc)?)
}

pub fn verify(cfg: &RunConfig, opts: VerifyOptions) -> Result<(), CliError> {
    let report = verify_report(cfg, &opts)?;
    let text = report.render();
    emit(None, text.as_bytes())?;
    if let Some(path) = &cfg.out {
        emit(Some(path), text.as_bytes())?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failed().map(|c| c.name).collect();
        Err(CliError::Verification(format!("failed checks: {}", names.join(", "))))
    }
}
