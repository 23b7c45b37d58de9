use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use windbid::backtest::{self, BacktestData, StrategySummary};
use windbid::scenario::{self, GaussianSpec, ScenarioSet};
use windbid::solver::{self, MiqpExportConfig};
use windbid::{percentile_strategy, solve_exact, RiskSpec, SolveOptions};

use crate::config::{BacktestConfig, Case, ExportConfig, SampleConfig, SolveConfig};
use crate::error::{usage, write_context, CliError};

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Missing(format!("{what} file {} not found", path.display())))
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(write_context(&dir.display().to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(write_context(&path.display().to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    let text = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(write_context(&path.display().to_string()))
}

fn load_scenarios(path: &Path, clamp: bool) -> Result<ScenarioSet, CliError> {
    require_file(path, "scenario")?;
    let set = scenario::load_scenarios_csv(path)?;
    Ok(if clamp { set.clamp_negative_prices() } else { set })
}

pub fn sample(cfg: &SampleConfig) -> Result<(), CliError> {
    let spec = match (cfg.case, cfg.cov_rt_wind, cfg.mean, cfg.covariance) {
        (_, _, Some(mean), Some(cov)) => GaussianSpec::new(mean, cov)?,
        (_, Some(c), _, _) => GaussianSpec::synthetic_case(c)?,
        (Some(Case::Case2), ..) => GaussianSpec::case2(),
        _ => GaussianSpec::case1(),
    };
    let set = scenario::sample_gaussian(&spec, cfg.scenarios, cfg.seed)?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join("scenarios.csv");
    scenario::write_scenarios_csv(&set, &path)?;

    let mean = set.mean();
    let cov = set.covariance();
    println!("wrote {} scenarios to {}", set.len(), path.display());
    println!("mean (lambda_da, lambda_rt, p_max_wind): {:.4} {:.4} {:.4}", mean[0], mean[1], mean[2]);
    println!("sample covariance:");
    for row in cov {
        println!("  {:>12.4} {:>12.4} {:>12.4}", row[0], row[1], row[2]);
    }
    Ok(())
}

fn solve_options(segments: usize, beta: f64, min_width: f64, threads: usize) -> Result<SolveOptions, CliError> {
    let risk = RiskSpec::new(beta).map_err(|e| usage(e.to_string()))?;
    let mut opts = SolveOptions::new(segments, risk);
    opts.min_segment_width_mw = min_width;
    opts.threads = threads;
    Ok(opts)
}

/// `0.9` -> `0.9`; used in file names.
fn tag(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize)]
struct PlotRow {
    lambda_da: f64,
    lambda_rt: f64,
    p_max_wind: f64,
    in_tail: u8,
}

pub fn solve(cfg: &SolveConfig) -> Result<(), CliError> {
    let path = cfg.scenarios.as_deref().expect("checked in resolve");
    let set = load_scenarios(path, cfg.clamp_negative_prices)?;
    create_dir(&cfg.out)?;
    for &beta in &cfg.betas {
        let mut opts = solve_options(cfg.segments, beta, cfg.min_segment_width, cfg.threads)?;
        opts.time_budget = cfg.time_budget_secs.map(Duration::from_secs_f64);
        opts.engine = cfg.engine;
        let report = solve_exact(&set, &opts)?;

        let curve_path = cfg.out.join(format!("curve_beta_{}.csv", tag(beta)));
        let mut out = create(&curve_path)?;
        report
            .curve
            .write_csv(&mut out)
            .map_err(|e| usage(format!("cannot write {}: {e}", curve_path.display())))?;
        drop(out);

        write_json(&cfg.out.join(format!("report_beta_{}.json", tag(beta))), &report.summary())?;

        let plot_path = cfg.out.join(format!("plot_beta_{}.csv", tag(beta)));
        let mut tail = vec![0u8; set.len()];
        for &i in &report.tail_indices {
            tail[i] = 1;
        }
        let mut w = csv::Writer::from_writer(create(&plot_path)?);
        for (s, &in_tail) in set.iter().zip(&tail) {
            w.serialize(PlotRow {
                lambda_da: s.lambda_da,
                lambda_rt: s.lambda_rt,
                p_max_wind: s.p_max_wind,
                in_tail,
            })
            .map_err(|e| usage(format!("cannot write {}: {e}", plot_path.display())))?;
        }
        w.flush().map_err(write_context(&plot_path.display().to_string()))?;

        println!(
            "beta {}: objective {:.6}, {} segment(s), {:.3} MW offered, {} nodes{}",
            tag(beta),
            report.objective,
            report.curve.len(),
            report.total_offered(),
            report.nodes_explored,
            if report.proof { "" } else { " (time budget reached, optimality not proven)" }
        );
    }
    Ok(())
}

pub fn export_miqp(cfg: &ExportConfig) -> Result<(), CliError> {
    let path = cfg.scenarios.as_deref().expect("checked in resolve");
    let set = load_scenarios(path, cfg.clamp_negative_prices)?;
    let risk = RiskSpec::new(cfg.beta).map_err(|e| usage(e.to_string()))?;
    let opts = SolveOptions::new(cfg.segments, risk);
    let model = MiqpExportConfig {
        big_m: cfg.big_m,
        epsilon: cfg.epsilon,
        l2_weight: cfg.l2_weight,
        include_redundant: cfg.include_redundant,
    };
    let out = cfg.output_path();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let stats = solver::export_miqp(&set, &opts, &model, &out)?;
    println!(
        "wrote {}: {} binary variables, {} constraints",
        out.display(),
        stats.binaries,
        stats.constraints
    );
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    start: String,
    end: String,
    strategies: BTreeMap<String, StrategySummary>,
}

enum Strategy {
    Cvar(f64),
    Percentile(f64),
}

impl Strategy {
    fn key(&self) -> String {
        match self {
            Strategy::Cvar(b) => format!("cvar_beta_{}", tag(*b)),
            Strategy::Percentile(p) => format!("percentile_{}", tag(*p)),
        }
    }
}

pub fn backtest(cfg: &BacktestConfig) -> Result<(), CliError> {
    let prices_path: &Path = cfg.prices.as_deref().expect("checked");
    let wind_path: &Path = cfg.wind_scenarios.as_deref().expect("checked");
    let actual_path: &Path = cfg.actual_wind.as_deref().expect("checked");
    require_file(prices_path, "price history")?;
    require_file(wind_path, "wind scenario")?;
    require_file(actual_path, "actual wind")?;
    let data = BacktestData {
        prices: scenario::load_price_history_csv(prices_path)?,
        wind_scenarios: backtest::load_wind_scenarios(wind_path)?,
        actual_wind: backtest::load_actual_wind_csv(actual_path)?,
        lookback_days: cfg.lookback_days,
    };
    let (start, end) = (cfg.start.expect("checked"), cfg.end.expect("checked"));
    create_dir(&cfg.out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| usage(format!("thread pool: {e}")))?;

    let strategies: Vec<Strategy> = cfg
        .betas
        .iter()
        .map(|&b| Strategy::Cvar(b))
        .chain(cfg.percentiles.iter().map(|&p| Strategy::Percentile(p)))
        .collect();

    let mut comparison = Comparison {
        start: start.to_string(),
        end: end.to_string(),
        strategies: BTreeMap::new(),
    };
    for strategy in &strategies {
        let clamp = cfg.clamp_negative_prices;
        let prepare = |s: &ScenarioSet| if clamp { s.clamp_negative_prices() } else { s.clone() };
        let result = pool.install(|| match *strategy {
            Strategy::Cvar(beta) => {
                let opts = solve_options(cfg.segments, beta, cfg.min_segment_width, 1)?;
                backtest::run_period(&data, start, end, |s| solve_exact(&prepare(s), &opts).map(|r| r.curve))
                    .map_err(CliError::from)
            }
            Strategy::Percentile(p) => {
                backtest::run_period(&data, start, end, |s| percentile_strategy(s, p)).map_err(CliError::from)
            }
        })?;
        let key = strategy.key();
        if result.records.is_empty() {
            let gaps: Vec<String> = result
                .skipped
                .iter()
                .take(10)
                .map(|s| format!("  {} {:02}: {}", s.date, s.hour, s.reason))
                .collect();
            return Err(CliError::Missing(format!(
                "{key}: no hour in {start} .. {end} has complete inputs; first gaps:\n{}",
                gaps.join("\n")
            )));
        }
        for s in &result.skipped {
            eprintln!("warning: {key}: skipped {} {:02}: {}", s.date, s.hour, s.reason);
        }
        let records_path: PathBuf = cfg.out.join(format!("records_{key}.csv"));
        backtest::write_records_csv(&result.records, &records_path)?;
        let summary = backtest::aggregate(&result.records)?;
        let parameter = match *strategy {
            Strategy::Cvar(b) => b,
            Strategy::Percentile(p) => p,
        };
        let strategy_name = match strategy {
            Strategy::Cvar(_) => "cvar",
            Strategy::Percentile(_) => "percentile",
        };
        println!(
            "{key}: total regret {:.2}, mean daily regret std {:.2} over {} hour(s)",
            summary.total_regret, summary.mean_daily_regret_std, summary.hours
        );
        comparison.strategies.insert(
            key,
            StrategySummary::new(strategy_name, parameter, summary, &result.skipped),
        );
    }
    write_json(&cfg.out.join("comparison.json"), &comparison)?;
    Ok(())
}
