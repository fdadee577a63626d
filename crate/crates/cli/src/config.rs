//! Run configuration: built-in defaults, then an optional `key=value` file,
//! then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const KEYS: [&str; 10] = [
    "gamma", "beta", "lambda", "a", "theta", "a_min", "a_max", "a_steps", "seed", "out",
];

/// Values read from a config file, keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are
    /// skipped. Unknown keys and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected key=value, got {raw:?}", n + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Input(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Input(format!("config line {}: duplicate key {key:?}", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Input(format!("config key {key}: cannot parse {v:?}"))),
        }
    }
}

/// Scalar settings shared by all commands. `None` means "use the command's
/// default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub a: Option<f64>,
    pub theta: Option<f64>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub a_steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(file: &FileConfig) -> Result<Self, CliError> {
        Ok(Self {
            gamma: file.get("gamma")?,
            beta: file.get("beta")?,
            lambda: file.get("lambda")?,
            a: file.get("a")?,
            theta: file.get("theta")?,
            a_min: file.get("a_min")?,
            a_max: file.get("a_max")?,
            a_steps: file.get("a_steps")?,
            seed: file.get("seed")?,
            out: file.get::<String>("out")?.map(PathBuf::from),
        })
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overridden_by(self, flags: RunConfig) -> Self {
        Self {
            gamma: flags.gamma.or(self.gamma),
            beta: flags.beta.or(self.beta),
            lambda: flags.lambda.or(self.lambda),
            a: flags.a.or(self.a),
            theta: flags.theta.or(self.theta),
            a_min: flags.a_min.or(self.a_min),
            a_max: flags.a_max.or(self.a_max),
            a_steps: flags.a_steps.or(self.a_steps),
            seed: flags.seed.or(self.seed),
            out: flags.out.or(self.out),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(2.5)
    }
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(2.5)
    }
    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(0.5)
    }
    pub fn a(&self) -> f64 {
        self.a.unwrap_or(0.0)
    }
}

/// An `a` sweep: `steps` evenly spaced values on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self, CliError> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
            return Err(CliError::Input(format!(
                "sweep needs 0 < a_min < a_max, got [{min}, {max}]"
            )));
        }
        if steps < 2 {
            return Err(CliError::Input(format!("sweep needs at least 2 steps, got {steps}")));
        }
        Ok(Self { min, max, steps })
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad number {v:?} in list {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Input("empty list".into()));
    }
    Ok(values)
}
