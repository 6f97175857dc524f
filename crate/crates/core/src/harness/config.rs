//! Experiment configuration: a flat `key = value` text file. Every algorithm
//! hyperparameter has a key whose default is the reference value, so an empty
//! file is a valid configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::optim::{SslAlmConfig, SswConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Adam,
    SslAlm,
    Ssw,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Adam, Algorithm::SslAlm, Algorithm::Ssw];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Adam => "adam",
            Algorithm::SslAlm => "ssl-alm",
            Algorithm::Ssw => "ssw",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Algorithm::Adam),
            "ssl-alm" | "ssl_alm" | "sslalm" => Ok(Algorithm::SslAlm),
            "ssw" => Ok(Algorithm::Ssw),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected adam, ssl-alm, or ssw)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the dataset comes from: a CSV file in the declared schema, or the
/// bundled synthetic generator.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        label_column: String,
        group_column: String,
    },
    Synthetic {
        spec: SyntheticSpec,
        /// Generation seed, fixed across repeats so every run sees the same data.
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub data: DataSource,
    pub hidden_dims: Vec<usize>,
    /// Positive-rate gap bound `c`.
    pub fairness_bound: f64,
    pub ssl_alm: SslAlmConfig,
    pub ssw: SswConfig,
    pub adam: AdamParams,
    pub budget_secs: f64,
    pub repeats: usize,
    /// Rows drawn from each group per minibatch.
    pub per_group: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Full-split statistics every this many iterations (plus the initial and
    /// final records).
    pub eval_interval: usize,
    pub test_fraction: f64,
    /// Optional hard cap on iterations, mainly for deterministic tests.
    pub max_iterations: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Adam,
            data: DataSource::Synthetic {
                spec: SyntheticSpec::default(),
                seed: 0,
            },
            hidden_dims: vec![64, 32],
            fairness_bound: 0.05,
            ssl_alm: SslAlmConfig::default(),
            ssw: SswConfig::default(),
            adam: AdamParams::default(),
            budget_secs: 60.0,
            repeats: 5,
            per_group: 16,
            base_seed: 0,
            out_dir: PathBuf::from("out"),
            eval_interval: 20,
            test_fraction: 0.2,
            max_iterations: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|item| parse_value(key, item))
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped, unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut csv_path: Option<PathBuf> = None;
        let mut label_column = "label".to_string();
        let mut group_column = "group".to_string();
        let mut synth = SyntheticSpec::default();
        let mut synth_seed = 0u64;
        let mut synth_groups_set = false;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "algorithm" => cfg.algorithm = value.parse()?,
                "csv_path" => csv_path = Some(PathBuf::from(value)),
                "label_column" => label_column = value.to_string(),
                "group_column" => group_column = value.to_string(),
                "synth_rows" => synth.rows = parse_value(key, value)?,
                "synth_features" => synth.feature_dim = parse_value(key, value)?,
                "synth_groups" => {
                    synth.group_count = parse_value(key, value)?;
                    synth_groups_set = true;
                }
                "synth_positive_rates" => synth.group_positive_rate = parse_list(key, value)?,
                "synth_margin" => synth.margin = parse_value(key, value)?,
                "synth_noise" => synth.noise_std = parse_value(key, value)?,
                "synth_seed" => synth_seed = parse_value(key, value)?,
                "hidden_dims" => cfg.hidden_dims = parse_list(key, value)?,
                "fairness_bound" => cfg.fairness_bound = parse_value(key, value)?,
                "mu" => cfg.ssl_alm.mu = parse_value(key, value)?,
                "rho" => cfg.ssl_alm.rho = parse_value(key, value)?,
                "tau" => cfg.ssl_alm.tau = parse_value(key, value)?,
                "eta" => cfg.ssl_alm.eta = parse_value(key, value)?,
                "beta" => cfg.ssl_alm.beta = parse_value(key, value)?,
                "dual_bound" => cfg.ssl_alm.dual_bound = parse_value(key, value)?,
                "eta_f" => cfg.ssw.eta_f = parse_value(key, value)?,
                "eta_c" => cfg.ssw.eta_c = parse_value(key, value)?,
                "eps0" => cfg.ssw.eps0 = parse_value(key, value)?,
                "constraint_samples" => cfg.ssw.constraint_samples = parse_value(key, value)?,
                "adam_lr" => cfg.adam.lr = parse_value(key, value)?,
                "adam_beta1" => cfg.adam.beta1 = parse_value(key, value)?,
                "adam_beta2" => cfg.adam.beta2 = parse_value(key, value)?,
                "adam_eps" => cfg.adam.eps_hat = parse_value(key, value)?,
                "budget_secs" => cfg.budget_secs = parse_value(key, value)?,
                "repeats" => cfg.repeats = parse_value(key, value)?,
                "per_group" => cfg.per_group = parse_value(key, value)?,
                "base_seed" => cfg.base_seed = parse_value(key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "eval_interval" => cfg.eval_interval = parse_value(key, value)?,
                "test_fraction" => cfg.test_fraction = parse_value(key, value)?,
                "max_iterations" => cfg.max_iterations = Some(parse_value(key, value)?),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown config key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }

        // Keep the default per-group rate list consistent when only the group
        // count was changed.
        if synth_groups_set && synth.group_positive_rate.len() != synth.group_count {
            if synth.group_positive_rate == SyntheticSpec::default().group_positive_rate {
                synth.group_positive_rate = (0..synth.group_count)
                    .map(|g| {
                        if synth.group_count == 1 {
                            0.5
                        } else {
                            0.8 - 0.6 * g as f64 / (synth.group_count - 1) as f64
                        }
                    })
                    .collect();
            }
        }

        cfg.data = match csv_path {
            Some(path) => DataSource::Csv {
                path,
                label_column,
                group_column,
            },
            None => DataSource::Synthetic {
                spec: synth,
                seed: synth_seed,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_secs > 0.0) {
            return Err(Error::Config(format!(
                "budget_secs must be positive, got {}",
                self.budget_secs
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if self.per_group == 0 {
            return Err(Error::Config("per_group must be >= 1".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.fairness_bound > 0.0) {
            return Err(Error::Config(format!(
                "fairness_bound must be positive, got {}",
                self.fairness_bound
            )));
        }
        self.ssl_alm.validate()?;
        self.ssw.validate()?;
        if let DataSource::Synthetic { spec, .. } = &self.data {
            spec.validate()?;
        }
        Ok(())
    }
}
