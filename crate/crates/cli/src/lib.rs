//! Command-line front end: solve, sweep and self-check the two-sided ISP
//! market model.
//!
//! Exit status: 0 on success, 1 when `verify` finds a failing check, 2 for
//! invalid input, 3 for internal errors.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use commands::{SolveMode, VerifyOptions};
use config::{parse_list, FileConfig, RunConfig};

pub const THREADS_ENV: &str = "NETMARKET_THREADS";

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
    Internal(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<netmarket::Error> for CliError {
    fn from(e: netmarket::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

/// Market parameters and output, shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// key=value file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Consumer power-law exponent (> 2).
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// CP power-law exponent (> 2).
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// CP utility per expected consumer.
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// CP cost per unit type.
    #[arg(short, long, global = true, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Exponent of the consumer value function φ(x) = x^θ.
    #[arg(long, global = true, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// RNG seed for `verify`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (CSV, or the report for `verify`).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal thresholds and fees at one parameter point.
    Solve {
        #[arg(long, value_enum, default_value = "revenue")]
        mode: SolveMode,
    },
    /// Welfare under net neutrality, revenue maximization and the social
    /// optimum over a range of CP costs.
    WelfareCurve {
        #[arg(long, allow_negative_numbers = true)]
        a_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        a_max: Option<f64>,
        #[arg(long)]
        a_steps: Option<usize>,
        /// Also draw the curves to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// The CP cost where net neutrality stops beating revenue maximization.
    Transition,
    /// Two-channel split, optionally scanned over comma-separated γ and β lists.
    Pmp {
        #[arg(long)]
        gammas: Option<String>,
        #[arg(long)]
        betas: Option<String>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Seeded self-checks against quadrature, Monte Carlo and grid search.
    Verify {
        /// Random parameter sets per check.
        #[arg(long)]
        cases: Option<usize>,
        /// Replace every numeric tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Monte Carlo draws per estimate (at least 1000).
        #[arg(long)]
        mc_samples: Option<usize>,
    },
}

#[derive(Parser)]
#[command(name = "netmarket", version, about = "Pricing and welfare in a two-sided ISP market")]
pub struct Root {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Sizes the global rayon pool from `NETMARKET_THREADS` (0 = one thread per
/// core). Only the first call in a process has an effect.
fn configure_threads() -> Result<(), CliError> {
    static CONFIGURED: OnceLock<Result<(), String>> = OnceLock::new();
    CONFIGURED
        .get_or_init(|| {
            let Ok(raw) = std::env::var(THREADS_ENV) else {
                return Ok(());
            };
            let n: usize = raw
                .trim()
                .parse()
                .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}"))?;
            // Fails only if the pool already exists, which leaves it usable.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        })
        .clone()
        .map_err(CliError::Input)
}

fn run(root: Root) -> Result<(), CliError> {
    configure_threads()?;
    let c = root.common;
    let file = match &c.config {
        Some(path) => RunConfig::from_file(&FileConfig::load(path)?)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig {
        gamma: c.gamma,
        beta: c.beta,
        lambda: c.lambda,
        a: c.a,
        theta: c.theta,
        seed: c.seed,
        out: c.out,
        ..RunConfig::default()
    };
    match root.command {
        Command::Solve { mode } => commands::solve(&file.overridden_by(flags), mode),
        Command::WelfareCurve {
            a_min,
            a_max,
            a_steps,
            svg,
        } => {
            flags.a_min = a_min;
            flags.a_max = a_max;
            flags.a_steps = a_steps;
            commands::welfare_curve(&file.overridden_by(flags), svg)
        }
        Command::Transition => commands::transition(&file.overridden_by(flags)),
        Command::Pmp { gammas, betas, svg } => {
            let gammas = gammas.as_deref().map(parse_list).transpose()?;
            let betas = betas.as_deref().map(parse_list).transpose()?;
            commands::pmp(&file.overridden_by(flags), gammas, betas, svg)
        }
        Command::Verify {
            cases,
            tolerance,
            mc_samples,
        } => commands::verify(
            &file.overridden_by(flags),
            VerifyOptions {
                cases,
                tolerance,
                mc_samples,
            },
        ),
    }
}

/// Parses `args` (program name first), runs the command and reports errors
/// on stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let root = match Root::try_parse_from(args) {
        Ok(root) => root,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(root) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netmarket: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
