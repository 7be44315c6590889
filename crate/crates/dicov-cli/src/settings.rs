//! Configuration layering: built-in defaults, then a flat key=value file,
//! then command-line flags, each stage overriding the last.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use dicov_core::experiment::Estimator;
use dicov_core::ExperimentConfig;

/// Flags shared by every verb; each mirrors a config-file key of the same
/// name.
#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat key=value configuration file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Matrix dimension p.
    #[arg(long)]
    pub p: Option<usize>,
    /// Samples per machine.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of machines M.
    #[arg(long)]
    pub machines: Option<usize>,
    /// Seeded trials to run.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Chain coupling of the synthetic ground truth.
    #[arg(long)]
    pub a: Option<f64>,
    /// Tuning multiplier applied to both the penalty and threshold rates.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Per-machine channel budget in matrix cells (default 10·p).
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Trial t draws from base_seed + t.
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Comma-separated subset of distributed,naive,full,full_debiased.
    #[arg(long)]
    pub estimators: Option<String>,
    /// Hub bind / worker connect address.
    #[arg(long)]
    pub address: Option<String>,
    /// Hub bind / worker connect port.
    #[arg(long)]
    pub port: Option<u16>,
    /// Network receive deadline in milliseconds.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Record real wall-clock times; off by default so output bytes are
    /// reproducible.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub timing: Option<bool>,
    /// Write output here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Typed view of one parsed config file. Absent keys stay `None`.
#[derive(Debug, Default)]
pub struct FileConfig {
    p: Option<usize>,
    n: Option<usize>,
    machines: Option<usize>,
    trials: Option<usize>,
    a: Option<f64>,
    beta: Option<f64>,
    bandwidth: Option<usize>,
    base_seed: Option<u64>,
    estimators: Option<Vec<Estimator>>,
    address: Option<String>,
    port: Option<u16>,
    timeout_ms: Option<u64>,
    timing: Option<bool>,
    m_values: Option<Vec<usize>>,
    beta_values: Option<Vec<f64>>,
    machine_id: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value, got `{line}`", idx + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                bail!("line {}: duplicate key `{key}`", idx + 1);
            }
            match key {
                "p" => c.p = Some(parse_value(key, value)?),
                "n" => c.n = Some(parse_value(key, value)?),
                "machines" => c.machines = Some(parse_value(key, value)?),
                "trials" => c.trials = Some(parse_value(key, value)?),
                "a" => c.a = Some(parse_value(key, value)?),
                "beta" => c.beta = Some(parse_value(key, value)?),
                "bandwidth" => c.bandwidth = Some(parse_value(key, value)?),
                "base_seed" => c.base_seed = Some(parse_value(key, value)?),
                "estimators" => c.estimators = Some(parse_estimators(value)?),
                "address" => c.address = Some(value.to_string()),
                "port" => c.port = Some(parse_value(key, value)?),
                "timeout_ms" => c.timeout_ms = Some(parse_value(key, value)?),
                "timing" => c.timing = Some(parse_value(key, value)?),
                "m_values" => c.m_values = Some(parse_list(key, value)?),
                "beta_values" => c.beta_values = Some(parse_list(key, value)?),
                "machine_id" => c.machine_id = Some(parse_value(key, value)?),
                other => bail!("line {}: unknown key `{other}`", idx + 1),
            }
        }
        Ok(c)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("key `{key}`: {e} (got `{value}`)"))
}

/// Comma-separated list; the empty string is the empty list.
fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|item| parse_value(key, item.trim())).collect()
}

pub fn parse_estimators(value: &str) -> Result<Vec<Estimator>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|name| Ok(Estimator::parse(name)?)).collect()
}

/// Folds defaults, file, and flags into a validated run configuration.
/// The bandwidth default tracks the resolved p.
pub fn resolve_experiment(args: &CommonArgs, file: &FileConfig) -> Result<ExperimentConfig> {
    let d = ExperimentConfig::default();
    let p = args.p.or(file.p).unwrap_or(d.p);
    let estimators = match (&args.estimators, &file.estimators) {
        (Some(flag), _) => parse_estimators(flag)?,
        (None, Some(from_file)) => from_file.clone(),
        (None, None) => d.estimators,
    };
    let config = ExperimentConfig {
        p,
        n: args.n.or(file.n).unwrap_or(d.n),
        machines: args.machines.or(file.machines).unwrap_or(d.machines),
        trials: args.trials.or(file.trials).unwrap_or(d.trials),
        a: args.a.or(file.a).unwrap_or(d.a),
        beta: args.beta.or(file.beta).unwrap_or(d.beta),
        bandwidth: args.bandwidth.or(file.bandwidth).unwrap_or(10 * p),
        base_seed: args.base_seed.or(file.base_seed).unwrap_or(d.base_seed),
        estimators,
        address: args.address.clone().or_else(|| file.address.clone()).unwrap_or(d.address),
        port: args.port.or(file.port).unwrap_or(d.port),
        timeout_ms: args.timeout_ms.or(file.timeout_ms).unwrap_or(d.timeout_ms),
        timing: args.timing.or(file.timing).unwrap_or(d.timing),
    };
    config.validate()?;
    Ok(config)
}

pub fn resolve_m_values(flag: Option<&str>, file: &FileConfig) -> Result<Vec<usize>> {
    match flag {
        Some(s) => parse_list("m_values", s.trim()),
        None => Ok(file.m_values.clone().unwrap_or_else(|| vec![2, 4, 8])),
    }
}

pub fn resolve_beta_values(flag: Option<&str>, file: &FileConfig) -> Result<Vec<f64>> {
    match flag {
        Some(s) => parse_list("beta_values", s.trim()),
        None => Ok(file.beta_values.clone().unwrap_or_else(|| vec![0.2, 0.6, 1.0, 1.4, 2.0])),
    }
}

pub fn resolve_machine_id(flag: Option<u32>, file: &FileConfig) -> Result<u32> {
    flag.or(file.machine_id)
        .context("machine_id is required (flag --machine-id or config key machine_id)")
}
