//! Run configuration: one JSON document with a `command` field, overridden
//! by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use serde::Deserialize;
use windbid::solver::Engine;

use crate::error::{read_context, usage, CliError};

/// Flags shared by every subcommand. Not every flag applies to every
/// command; inapplicable ones are rejected.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed (sample)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated risk levels, each in [0, 1)
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub beta: Option<Vec<f64>>,
    /// Number of offer-curve segments
    #[arg(long, value_name = "N")]
    pub segments: Option<usize>,
    /// Drop segments narrower than this many MW
    #[arg(long, value_name = "MW")]
    pub min_segment_width: Option<f64>,
    /// Replace negative prices by zero when loading scenarios
    #[arg(long)]
    pub clamp_negative_prices: bool,
    /// Worker threads (0 = all cores)
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Sample,
    Solve,
    ExportMiqp,
    Backtest,
}

impl CommandName {
    fn as_str(self) -> &'static str {
        match self {
            CommandName::Sample => "sample",
            CommandName::Solve => "solve",
            CommandName::ExportMiqp => "export-miqp",
            CommandName::Backtest => "backtest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Case1,
    Case2,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default)]
    pub case: Option<Case>,
    /// Covariance of real-time price and wind on the synthetic case.
    #[serde(default)]
    pub cov_rt_wind: Option<f64>,
    #[serde(default)]
    pub mean: Option<[f64; 3]>,
    #[serde(default)]
    pub covariance: Option<[[f64; 3]; 3]>,
    #[serde(default = "default_scenarios")]
    pub scenarios: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub scenarios: Option<PathBuf>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_min_width")]
    pub min_segment_width: f64,
    #[serde(default)]
    pub clamp_negative_prices: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    pub scenarios: Option<PathBuf>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default)]
    pub clamp_negative_prices: bool,
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub l2_weight: f64,
    #[serde(default = "default_true")]
    pub include_redundant: bool,
    /// Model file; when absent `<out>/model.lp` is used if an output
    /// directory was given.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    pub prices: Option<PathBuf>,
    pub wind_scenarios: Option<PathBuf>,
    pub actual_wind: Option<PathBuf>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    #[serde(default = "default_lookback")]
    pub lookback_days: u32,
    #[serde(default = "default_backtest_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_min_width")]
    pub min_segment_width: f64,
    #[serde(default)]
    pub clamp_negative_prices: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_scenarios() -> usize {
    250
}
fn default_out() -> PathBuf {
    PathBuf::from(".")
}
fn default_betas() -> Vec<f64> {
    vec![0.0, 0.5, 0.9]
}
fn default_backtest_betas() -> Vec<f64> {
    vec![0.5]
}
fn default_percentiles() -> Vec<f64> {
    vec![0.25, 0.5]
}
fn default_segments() -> usize {
    6
}
fn default_min_width() -> f64 {
    1.0
}
fn default_threads() -> usize {
    1
}
fn default_epsilon() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}
fn default_lookback() -> u32 {
    50
}

/// Parse the config file (if any) for `command`, checking its `command`
/// field. `{}` is used when no file is given.
fn load<T: for<'de> Deserialize<'de>>(path: Option<&Path>, command: CommandName) -> Result<T, CliError> {
    let mut value: serde_json::Value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(read_context(&format!("config {}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?
        }
        None => serde_json::json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| usage("config must be a JSON object"))?;
    if let Some(tag) = obj.remove("command") {
        let named: CommandName =
            serde_json::from_value(tag).map_err(|e| usage(format!("config `command`: {e}")))?;
        if named != command {
            return Err(usage(format!(
                "config is for `{}` but `{}` was invoked",
                named.as_str(),
                command.as_str()
            )));
        }
    } else if path.is_some() {
        return Err(usage("config is missing the `command` field"));
    }
    serde_json::from_value(value).map_err(|e| usage(format!("config: {e}")))
}

fn reject(flag: &str, present: bool, command: CommandName) -> Result<(), CliError> {
    if present {
        Err(usage(format!("--{flag} does not apply to `{}`", command.as_str())))
    } else {
        Ok(())
    }
}

fn check_betas(betas: &[f64]) -> Result<(), CliError> {
    if betas.is_empty() {
        return Err(usage("at least one beta is required"));
    }
    for &b in betas {
        if !(0.0..1.0).contains(&b) {
            return Err(usage(format!("beta {b} must lie in [0, 1)")));
        }
    }
    Ok(())
}

fn check_common(segments: usize, min_width: f64) -> Result<(), CliError> {
    if segments == 0 {
        return Err(usage("segments must be at least 1"));
    }
    if !(min_width >= 0.0 && min_width.is_finite()) {
        return Err(usage("min_segment_width must be finite and nonnegative"));
    }
    Ok(())
}

impl SampleConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let c = CommandName::Sample;
        reject("beta", flags.beta.is_some(), c)?;
        reject("segments", flags.segments.is_some(), c)?;
        reject("min-segment-width", flags.min_segment_width.is_some(), c)?;
        reject("clamp-negative-prices", flags.clamp_negative_prices, c)?;
        reject("threads", flags.threads.is_some(), c)?;
        let mut cfg: SampleConfig = load(flags.config.as_deref(), c)?;
        if let Some(seed) = flags.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &flags.out {
            cfg.out = out.clone();
        }
        if cfg.scenarios == 0 {
            return Err(usage("scenarios must be at least 1"));
        }
        let explicit = cfg.mean.is_some() || cfg.covariance.is_some();
        if explicit && (cfg.mean.is_none() || cfg.covariance.is_none()) {
            return Err(usage("`mean` and `covariance` must be given together"));
        }
        if [cfg.case.is_some(), cfg.cov_rt_wind.is_some(), explicit].iter().filter(|x| **x).count() > 1 {
            return Err(usage("give only one of `case`, `cov_rt_wind` or `mean`/`covariance`"));
        }
        Ok(cfg)
    }
}

impl SolveConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let c = CommandName::Solve;
        reject("seed", flags.seed.is_some(), c)?;
        let mut cfg: SolveConfig = load(flags.config.as_deref(), c)?;
        if let Some(b) = &flags.beta {
            cfg.betas = b.clone();
        }
        if let Some(n) = flags.segments {
            cfg.segments = n;
        }
        if let Some(w) = flags.min_segment_width {
            cfg.min_segment_width = w;
        }
        cfg.clamp_negative_prices |= flags.clamp_negative_prices;
        if let Some(t) = flags.threads {
            cfg.threads = t;
        }
        if let Some(out) = &flags.out {
            cfg.out = out.clone();
        }
        if cfg.scenarios.is_none() {
            return Err(usage("solve needs `scenarios` (path to a scenario CSV) in the config"));
        }
        check_betas(&cfg.betas)?;
        check_common(cfg.segments, cfg.min_segment_width)?;
        if let Some(t) = cfg.time_budget_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(usage("time_budget_secs must be positive"));
            }
        }
        Ok(cfg)
    }
}

impl ExportConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let c = CommandName::ExportMiqp;
        reject("seed", flags.seed.is_some(), c)?;
        reject("min-segment-width", flags.min_segment_width.is_some(), c)?;
        reject("threads", flags.threads.is_some(), c)?;
        let mut cfg: ExportConfig = load(flags.config.as_deref(), c)?;
        if let Some(b) = &flags.beta {
            match b.as_slice() {
                [one] => cfg.beta = *one,
                _ => return Err(usage("export-miqp takes a single --beta")),
            }
        }
        if let Some(n) = flags.segments {
            cfg.segments = n;
        }
        cfg.clamp_negative_prices |= flags.clamp_negative_prices;
        if let Some(out) = &flags.out {
            cfg.out = Some(out.clone());
        }
        if cfg.scenarios.is_none() {
            return Err(usage("export-miqp needs `scenarios` (path to a scenario CSV) in the config"));
        }
        if cfg.output.is_none() && cfg.out.is_none() {
            return Err(usage("export-miqp needs an output path (`output` in the config or --out)"));
        }
        check_betas(&[cfg.beta])?;
        check_common(cfg.segments, 0.0)?;
        Ok(cfg)
    }

    pub fn output_path(&self) -> PathBuf {
        match (&self.output, &self.out) {
            (Some(p), _) => p.clone(),
            (None, Some(dir)) => dir.join("model.lp"),
            (None, None) => unreachable!("checked in resolve"),
        }
    }
}

impl BacktestConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let c = CommandName::Backtest;
        reject("seed", flags.seed.is_some(), c)?;
        let mut cfg: BacktestConfig = load(flags.config.as_deref(), c)?;
        if let Some(b) = &flags.beta {
            cfg.betas = b.clone();
        }
        if let Some(n) = flags.segments {
            cfg.segments = n;
        }
        if let Some(w) = flags.min_segment_width {
            cfg.min_segment_width = w;
        }
        cfg.clamp_negative_prices |= flags.clamp_negative_prices;
        if let Some(t) = flags.threads {
            cfg.threads = t;
        }
        if let Some(out) = &flags.out {
            cfg.out = out.clone();
        }
        for (key, v) in [
            ("prices", cfg.prices.is_none()),
            ("wind_scenarios", cfg.wind_scenarios.is_none()),
            ("actual_wind", cfg.actual_wind.is_none()),
            ("start", cfg.start.is_none()),
            ("end", cfg.end.is_none()),
        ] {
            if v {
                return Err(usage(format!("backtest needs `{key}` in the config")));
            }
        }
        if cfg.end < cfg.start {
            return Err(usage(format!(
                "date range {} .. {} is empty",
                cfg.start.expect("checked"),
                cfg.end.expect("checked")
            )));
        }
        if cfg.betas.is_empty() && cfg.percentiles.is_empty() {
            return Err(usage("backtest needs at least one beta or percentile strategy"));
        }
        if !cfg.betas.is_empty() {
            check_betas(&cfg.betas)?;
        }
        for &p in &cfg.percentiles {
            if !(0.0..=1.0).contains(&p) {
                return Err(usage(format!("percentile {p} must lie in [0, 1]")));
            }
        }
        if cfg.lookback_days == 0 {
            return Err(usage("lookback_days must be at least 1"));
        }
        check_common(cfg.segments, cfg.min_segment_width)?;
        Ok(cfg)
    }
}
