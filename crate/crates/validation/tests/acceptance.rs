//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line straight
//! to stdout (bypassing libtest capture) and then asserts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use netmarket::market::{self, Thresholds};
use netmarket::oracle::{self, FeePolicy, GridSpec, MarketRanges};
use netmarket::pmp::{self, ChannelSplit, PmpScanRow};
use netmarket::quadrature::{integrate, integrate_tail, QuadConfig};
use netmarket::solver;
use netmarket::{Exponent, MarketParams, PhiSpec};
use netmarket_cli::commands::{verify_report, VerifyOptions};
use netmarket_cli::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, failures: &[String], detail: &str, elapsed: Duration) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{status}] {id}: {detail} ({:.2} s)", elapsed.as_secs_f64());
    for f in failures.iter().take(10) {
        let _ = writeln!(out, "         {f}");
    }
    let _ = out.flush();
}

fn finish(id: &str, failures: Vec<String>, detail: &str, start: Instant, budget: Option<Duration>) {
    let mut failures = failures;
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            failures.push(format!(
                "runtime {:.2} s exceeds {:.0} s",
                elapsed.as_secs_f64(),
                b.as_secs_f64()
            ));
        }
    }
    report(id, &failures, detail, elapsed);
    assert!(failures.is_empty(), "{id} failed:\n{}", failures.join("\n"));
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn describe(p: &MarketParams) -> String {
    format!(
        "γ={:.4} β={:.4} λ={:.4} θ={:.4} a={:.6}",
        p.gamma().value(),
        p.beta().value(),
        p.lambda(),
        p.phi().theta().unwrap_or(f64::NAN),
        p.a()
    )
}

fn fig1(a: f64) -> MarketParams {
    MarketParams::new(2.5, 2.5, 0.1, a, PhiSpec::sqrt()).unwrap()
}

#[test]
fn c1_welfare_gap_signs() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let p = fig1(0.0);
    let q = QuadConfig::default();
    // ζ = h(y₀) = ½(∫_{x₀}φ′(Ȳx)x^{1−γ}dx + λX̄), every piece by quadrature.
    let x_bar = integrate_tail(|x: f64| x.powf(-1.5), p.x0(), 0.5, q).unwrap().value;
    let y_bar = integrate_tail(|y: f64| y.powf(-1.5), p.y0(), 0.5, q).unwrap().value;
    let integral = integrate_tail(|x: f64| 0.5 / (y_bar * x).sqrt() * x.powf(-1.5), p.x0(), 1.0, q)
        .unwrap()
        .value;
    let zeta_quad = 0.5 * (integral + 0.1 * x_bar);
    let zeta = solver::constants(&p).unwrap().zeta;
    if (zeta - zeta_quad).abs() > 1e-6 {
        failures.push(format!("ζ = {zeta} vs quadrature {zeta_quad}"));
    }
    let mut gaps = Vec::new();
    for (m, want_positive) in [(1.1, true), (1.5, false), (2.0, false)] {
        let gap = solver::welfare_gap(&p, m * zeta).unwrap();
        gaps.push(format!("gap({m}ζ)={gap:+.4e}"));
        if (gap > 0.0) != want_positive {
            failures.push(format!("welfare_gap({m}ζ) = {gap} has the wrong sign"));
        }
    }
    let detail = format!(
        "ζ={zeta:.10} (quadrature {zeta_quad:.10}, 0.3309832 off by {:.1e}), {}",
        (zeta - 0.3309832f64).abs(),
        gaps.join(", ")
    );
    finish(
        "C1 welfare-gap signs at γ=β=2.5, λ=0.1, θ=0.5",
        failures,
        &detail,
        start,
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn c2_zero_consumer_fee_matches_grid() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ranges = MarketRanges::default();
    let mut worst = 0.0f64;
    let mut interior = 0;
    for seed in 0..20u64 {
        let mut r = rng(200 + seed);
        let base = ranges.sample(&mut r, 0.0).unwrap();
        let a = r.random_range(0.0..1.5 * base.lambda() * base.mean_x());
        let p = base.with_a(a).unwrap();
        let sol = solver::solve_revenue_c0(&p).unwrap();
        if sol.regime == solver::Regime::Interior {
            interior += 1;
        }
        let cap = p.beta().type_with_tail_mass(oracle::DEFAULT_TAIL_CUTOFF).unwrap();
        let grid = oracle::grid_revenue_c0(&p, 2000, cap).unwrap();
        let dev = (grid.value - sol.revenue).abs() / sol.revenue.abs();
        worst = worst.max(dev);
        if dev > 1e-6 {
            failures.push(format!("revenue off by {dev:.3e} {}", describe(&p)));
        }
        if !grid.within_one_cell(sol.thresholds.y_t) {
            failures.push(format!(
                "cutoff {} not within one cell of grid argmax {} {}",
                sol.thresholds.y_t,
                grid.y_t,
                describe(&p)
            ));
        }
    }
    let detail = format!("20 sets ({interior} interior), max relative revenue gap {worst:.2e}");
    finish(
        "C2 zero-consumer-fee optimum vs 2000-point grid",
        failures,
        &detail,
        start,
        Some(Duration::from_secs(5)),
    );
}

#[test]
fn c3_analytic_optima_dominate_grid() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ranges = MarketRanges::default();
    let (mut worst_rev, mut worst_wel) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for seed in 0..20u64 {
        let mut r = rng(300 + seed);
        let base = ranges.sample(&mut r, 0.0).unwrap();
        let zeta = solver::constants(&base).unwrap().zeta;
        let p = base.with_a(r.random_range(0.0..3.0 * zeta)).unwrap();
        let grid = GridSpec::default_for(&p)
            .unwrap()
            .with_fee_policy(FeePolicy::AllowSubsidy);

        let rev = solver::solve_revenue(&p).unwrap();
        let best = oracle::grid_revenue(&p, grid).unwrap();
        let excess = (best.value - rev.revenue) / rev.revenue.abs();
        worst_rev = worst_rev.max(excess);
        if excess > 1e-6 {
            failures.push(format!(
                "grid revenue exceeds analytic by {excess:.3e} {}",
                describe(&p)
            ));
        }
        if !best.y_within_one_cell(rev.thresholds.y_t) || !best.x_within_one_cell(rev.thresholds.x_t) {
            failures.push(format!("revenue thresholds off-cell {}", describe(&p)));
        }
        if best.x_index != 0 {
            failures.push(format!("revenue grid argmax x index {} {}", best.x_index, describe(&p)));
        }

        let soc = solver::solve_social(&p).unwrap();
        let best = oracle::grid_welfare(&p, grid).unwrap();
        let excess = (best.value - soc.welfare) / soc.welfare.abs();
        worst_wel = worst_wel.max(excess);
        if excess > 1e-6 {
            failures.push(format!(
                "grid welfare exceeds analytic by {excess:.3e} {}",
                describe(&p)
            ));
        }
        if !best.y_within_one_cell(soc.thresholds.y_t) || !best.x_within_one_cell(soc.thresholds.x_t) {
            failures.push(format!("welfare thresholds off-cell {}", describe(&p)));
        }
        if best.x_index != 0 {
            failures.push(format!("welfare grid argmax x index {} {}", best.x_index, describe(&p)));
        }
    }
    let detail = format!(
        "20 sets, 200×200 grids, max (grid − analytic)/analytic: revenue {worst_rev:.2e}, welfare {worst_wel:.2e}"
    );
    finish(
        "C3 analytic revenue and welfare optima vs grid",
        failures,
        &detail,
        start,
        Some(Duration::from_secs(60)),
    );
}

#[test]
fn c4_revenue_cutoff_exceeds_social_cutoff() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ranges = MarketRanges::default();
    let (mut min_margin, mut min_gh) = (f64::INFINITY, f64::INFINITY);
    for seed in 0..20u64 {
        let mut r = rng(400 + seed);
        let base = ranges.sample(&mut r, 0.0).unwrap();
        let zeta = solver::constants(&base).unwrap().zeta;
        // a uniform on (ζ, 5ζ]
        let p = base.with_a(zeta * (1.0 + 4.0 * (1.0 - r.random::<f64>()))).unwrap();
        let c = solver::compare_cutoffs(&p).unwrap();
        let margin = c.y_star - c.y_hat;
        min_margin = min_margin.min(margin);
        if !(margin > 1e-9) {
            failures.push(format!("y* − ŷ = {margin:e} {}", describe(&p)));
        }
        for y in solver::log_grid(p.y0(), p.y0() * 1e6, 100) {
            let d = solver::h(&p, y).unwrap() - solver::g(&p, y).unwrap();
            min_gh = min_gh.min(d);
            if !(d > 1e-9) {
                failures.push(format!("h − g = {d:e} at y = {y} {}", describe(&p)));
            }
        }
    }
    let detail = format!("20 sets, min y*−ŷ {min_margin:.3e}, min h−g {min_gh:.3e}");
    finish("C4 revenue cutoff above social cutoff", failures, &detail, start, None);
}

#[test]
fn c5_unique_transition() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ranges = MarketRanges::default();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let p = ranges.sample(&mut rng(500 + seed), 0.0).unwrap();
        match solver::find_transition(&p) {
            Ok(t) => {
                worst = worst.max(t.gap_at_root.abs());
                if !(t.gap_at_root.abs() < 1e-8) {
                    failures.push(format!("|gap(ā)| = {:e} {}", t.gap_at_root.abs(), describe(&p)));
                }
                if t.scan_sign_changes != 1 {
                    failures.push(format!("{} sign changes {}", t.scan_sign_changes, describe(&p)));
                }
            }
            Err(e) => failures.push(format!("{e} {}", describe(&p))),
        }
    }
    let detail = format!("10 sets, max |welfare_gap(ā)| {worst:.2e}");
    finish(
        "C5 unique welfare transition",
        failures,
        &detail,
        start,
        Some(Duration::from_secs(30)),
    );
}

const PMP_BETA: f64 = 2.5;
const PMP_THETA: f64 = 0.5;
const PMP_BETAS: [f64; 3] = [2.2, 2.5, 3.0];

fn pmp_gammas() -> Vec<f64> {
    (0..20).map(|i| 2.1 + 0.1 * i as f64).collect()
}

/// The γ-scan at β = 2.5 and the β-scan at the largest γ, shared by the
/// two-channel tests.
fn pmp_scans() -> &'static (Vec<PmpScanRow>, Vec<PmpScanRow>, Duration) {
    static SCANS: OnceLock<(Vec<PmpScanRow>, Vec<PmpScanRow>, Duration)> = OnceLock::new();
    SCANS.get_or_init(|| {
        let start = Instant::now();
        let gammas = pmp_gammas();
        let by_gamma = pmp::scan(&gammas, &[PMP_BETA], pmp::DEFAULT_LAMBDA, PMP_THETA).unwrap();
        let by_beta = pmp::scan(&[*gammas.last().unwrap()], &PMP_BETAS, pmp::DEFAULT_LAMBDA, PMP_THETA).unwrap();
        (by_gamma, by_beta, start.elapsed())
    })
}

#[test]
fn c6a_two_channel_consumer_threshold() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ranges = MarketRanges {
        lambda: (0.005, 0.2),
        ..MarketRanges::default()
    };
    for seed in 0..20u64 {
        let mut r = rng(600 + seed);
        let p = ranges.sample(&mut r, 0.0).unwrap();
        let y_t = p.y0() * r.random_range(1.0f64..1e3);
        let s = p.beta().tail_first_moment(y_t).unwrap() / p.mean_y();
        let split = ChannelSplit::new((s + (1.0 - s) * r.random::<f64>()).min(1.0), y_t).unwrap();
        if !pmp::is_feasible(&p, split).unwrap() {
            failures.push(format!("drawn split infeasible {}", describe(&p)));
            continue;
        }
        if !pmp::pmp_verify_x0(&p, split, 200).unwrap() {
            failures.push(format!(
                "revenue rises in x_t at B₁={} y_t={} {}",
                split.b1,
                split.y_t,
                describe(&p)
            ));
        }
    }
    finish(
        "C6a two-channel revenue non-increasing in x_t",
        failures,
        "20 feasible points",
        start,
        Some(Duration::from_secs(120)),
    );
}

#[test]
fn c6b_two_channel_dominates_one_channel() {
    let start = Instant::now();
    let (by_gamma, by_beta, scan_time) = pmp_scans();
    let mut failures = Vec::new();
    for row in by_gamma.iter().chain(by_beta) {
        let s = &row.solution;
        if s.revenue < s.one_channel_revenue {
            failures.push(format!(
                "γ={} β={}: {} < {}",
                row.gamma, row.beta, s.revenue, s.one_channel_revenue
            ));
        }
    }
    let detail = format!("{} solves", by_gamma.len() + by_beta.len());
    finish(
        "C6b two-channel revenue ≥ one-channel revenue",
        failures,
        &detail,
        start - *scan_time,
        Some(Duration::from_secs(120)),
    );
}

#[test]
fn c6c_two_channel_gamma_threshold() {
    let start = Instant::now();
    let (by_gamma, _, scan_time) = pmp_scans();
    let flags: Vec<bool> = by_gamma.iter().map(|r| r.solution.degenerate).collect();
    let first_open = flags.iter().position(|d| !d);
    let mut failures = Vec::new();
    match first_open {
        None => failures.push("every γ in the scan gives the one-channel optimum (B₁ = 1, y_t = y₀)".to_string()),
        Some(0) => failures.push("no degenerate γ below the transition".to_string()),
        Some(i) if flags[i..].iter().any(|&d| d) => failures.push("degenerate again above the transition".to_string()),
        Some(_) => {}
    }
    let detail = format!(
        "γ ∈ [{:.1}, {:.1}], β={PMP_BETA}, λ={}, θ={PMP_THETA}: {} of {} degenerate",
        by_gamma[0].gamma,
        by_gamma.last().unwrap().gamma,
        pmp::DEFAULT_LAMBDA,
        flags.iter().filter(|&&d| d).count(),
        flags.len()
    );
    finish(
        "C6c degenerate → non-degenerate transition in γ",
        failures,
        &detail,
        start - *scan_time,
        Some(Duration::from_secs(120)),
    );
}

#[test]
fn c6d_two_channel_share_depends_on_beta_only() {
    let start = Instant::now();
    let (by_gamma, by_beta, scan_time) = pmp_scans();
    let mut failures = Vec::new();
    let open: Vec<f64> = by_gamma
        .iter()
        .filter(|r| !r.solution.degenerate)
        .map(|r| r.solution.split.b1)
        .collect();
    if open.is_empty() {
        failures.push("no γ past a transition to compare B₁ across".to_string());
    } else {
        let spread =
            open.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - open.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(spread < 0.05) {
            failures.push(format!("B₁ varies by {spread} across γ past the transition"));
        }
    }
    let b1s: Vec<f64> = by_beta.iter().map(|r| r.solution.split.b1).collect();
    let beta_spread =
        b1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b1s.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(beta_spread > 0.05) {
        failures.push(format!(
            "B₁ varies by only {beta_spread} across β ∈ {PMP_BETAS:?} (B₁ = {b1s:?})"
        ));
    }
    let detail = format!(
        "B₁ spread across β = {beta_spread:.3}, non-degenerate γ count {}",
        open.len()
    );
    finish(
        "C6d optimal B₁ varies with β, not γ",
        failures,
        &detail,
        start - *scan_time,
        Some(Duration::from_secs(120)),
    );
}

#[test]
fn c7_numerical_hygiene() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let q = QuadConfig::default();
    let mut worst = 0.0f64;
    let mut check = |what: String, closed: f64, quad: f64, failures: &mut Vec<String>| {
        let rel = (closed - quad).abs() / quad.abs();
        worst = worst.max(rel);
        if !(rel <= 1e-9) {
            failures.push(format!("{what}: closed {closed} vs quadrature {quad} (rel {rel:.2e})"));
        }
    };
    let ranges = MarketRanges::default();
    for seed in 0..20u64 {
        let mut r = rng(700 + seed);
        let p = ranges.sample(&mut r, 0.0).unwrap();
        let (g, ge) = (p.gamma(), p.gamma().value());
        let t = p.x0() * r.random_range(1.0..30.0);
        check(
            format!("tail mass e={ge}"),
            g.tail_mass(t).unwrap(),
            integrate_tail(|x: f64| x.powf(-ge), t, ge - 1.0, q).unwrap().value,
            &mut failures,
        );
        check(
            format!("first moment e={ge}"),
            g.tail_first_moment(t).unwrap(),
            integrate_tail(|x: f64| x.powf(1.0 - ge), t, ge - 2.0, q).unwrap().value,
            &mut failures,
        );
        let hi = t * r.random_range(1.5..100.0);
        check(
            format!("first moment between e={ge}"),
            g.first_moment_between(t, hi).unwrap(),
            integrate(|x: f64| x.powf(1.0 - ge), t, hi, q).unwrap().value,
            &mut failures,
        );
        let theta = p.phi().theta().unwrap();
        let phi = p.phi();
        let z = r.random_range(0.3..30.0);
        check(
            format!("φ′ tail integral {}", describe(&p)),
            phi.phi_prime_tail_integral(g, z).unwrap(),
            integrate_tail(
                |x: f64| phi.derivative(z * x).unwrap() * x.powf(1.0 - ge),
                p.x0(),
                ge - 1.0 - theta,
                q,
            )
            .unwrap()
            .value,
            &mut failures,
        );
        check(
            format!("φ tail integral {}", describe(&p)),
            phi.value_tail_integral(g, z, t).unwrap(),
            integrate_tail(|x: f64| phi.value(z * x).unwrap() * x.powf(-ge), t, ge - 1.0 - theta, q)
                .unwrap()
                .value,
            &mut failures,
        );
        // Welfare at an interior threshold pair, consumer part by quadrature.
        let th = Thresholds::new(p.x0() * 1.7, p.y0() * 2.3);
        let k = market::consumer_match_scale(&p, th).unwrap();
        let consumer = integrate_tail(
            |x: f64| phi.value(k * x).unwrap() * x.powf(-ge),
            th.x_t,
            ge - 1.0 - theta,
            q,
        )
        .unwrap()
        .value;
        let fx = integrate_tail(|x: f64| x.powf(1.0 - ge), th.x_t, ge - 2.0, q)
            .unwrap()
            .value;
        let be = p.beta().value();
        let fy = integrate_tail(|y: f64| y.powf(1.0 - be), th.y_t, be - 2.0, q)
            .unwrap()
            .value;
        let t0 = market::base_traffic(&p);
        check(
            format!("welfare {}", describe(&p)),
            market::welfare(&p, th).unwrap(),
            consumer + p.lambda() * (t0 * fx * fy).sqrt(),
            &mut failures,
        );
    }
    let mut worst_z = 0.0f64;
    for (i, (e, t)) in [
        (2.5, None),
        (3.0, Some(1.0)),
        (2.2, None),
        (4.0, Some(2.0)),
        (2.8, Some(5.0)),
    ]
    .into_iter()
    .enumerate()
    {
        let e = Exponent::new(e).unwrap();
        let t = t.unwrap_or(e.min_type());
        for (k, reference) in [(1.0, e.tail_first_moment(t).unwrap()), (0.0, e.tail_mass(t).unwrap())] {
            let est = oracle::mc_tail_moment(e, t, k, 1_000_000, 7000 + i as u64).unwrap();
            let z = est.z_score(reference);
            worst_z = worst_z.max(z);
            if !(z < 3.0) {
                failures.push(format!(
                    "Monte Carlo e={} t={t} k={k}: {z:.2} standard errors",
                    e.value()
                ));
            }
        }
    }
    let mut worst_norm = 0.0f64;
    for i in 0..200 {
        let e = Exponent::new(2.0 + 1e-3 + 8.0 * i as f64 / 199.0).unwrap();
        let dev = (e.tail_mass(e.min_type()).unwrap() - 1.0).abs();
        worst_norm = worst_norm.max(dev);
        if !(dev <= 1e-12) {
            failures.push(format!("tail mass at minimum type for e={}: off by {dev:e}", e.value()));
        }
    }
    let detail = format!(
        "max closed-form vs quadrature {worst:.2e}, max Monte Carlo |z| {worst_z:.2}, max |mass − 1| {worst_norm:.1e}"
    );
    finish("C7 numerical hygiene", failures, &detail, start, None);
}

#[test]
fn c8_verify_report_is_deterministic() {
    let start = Instant::now();
    let cfg = RunConfig {
        seed: Some(12345),
        ..RunConfig::default()
    };
    let opts = VerifyOptions::default();
    let first = verify_report(&cfg, &opts).unwrap().render();
    let second = verify_report(&cfg, &opts).unwrap().render();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| verify_report(&cfg, &opts)).unwrap().render();
    let mut failures = Vec::new();
    if first != second {
        failures.push("two runs with the same seed differ".to_string());
    }
    if first != serial {
        failures.push("single-threaded run differs from the default pool".to_string());
    }
    let detail = format!("seed 12345, {} report bytes, 3 runs identical", first.len());
    finish("C8 deterministic verify report", failures, &detail, start, None);
}
