//! Hourly two-settlement replay and regret aggregation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{clear, settle_realtime, OfferCurve};
use crate::scenario::{build_historical_scenarios, PriceHistory, ScenarioError, ScenarioSet};
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("no backtest records to aggregate")]
    NoRecords,
    #[error("date range {start} .. {end} is empty")]
    EmptyRange { start: NaiveDate, end: NaiveDate },
    #[error("strategy failed for {date} hour {hour}: {source}")]
    Strategy {
        date: NaiveDate,
        hour: u32,
        #[source]
        source: SolverError,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestRecord {
    pub date: NaiveDate,
    pub hour: u32,
    pub actual_da: f64,
    pub actual_rt: f64,
    pub actual_wind: f64,
    pub cleared_mw: f64,
    pub profit: f64,
    pub ideal_profit: f64,
    pub regret: f64,
}

/// Hindsight profit from selling all wind in the better of the two markets.
pub fn ideal_profit(actual_da: f64, actual_rt: f64, actual_wind: f64) -> f64 {
    actual_da.max(actual_rt) * actual_wind
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuals {
    pub da: f64,
    pub rt: f64,
    pub wind: f64,
}

pub fn run_hour(curve: &OfferCurve, date: NaiveDate, hour: u32, actual: Actuals) -> BacktestRecord {
    let cleared_mw = clear(curve, actual.da).cleared_mw;
    let profit = settle_realtime(curve, actual.da, actual.rt, actual.wind);
    let ideal = ideal_profit(actual.da, actual.rt, actual.wind);
    BacktestRecord {
        date,
        hour,
        actual_da: actual.da,
        actual_rt: actual.rt,
        actual_wind: actual.wind,
        cleared_mw,
        profit,
        ideal_profit: ideal,
        regret: ideal - profit,
    }
}

/// Wind scenarios for the simulated hours.
#[derive(Debug, Clone, PartialEq)]
pub enum WindScenarios {
    /// One list reused for every hour.
    Shared(Vec<f64>),
    /// A list per `(date, hour)`.
    Hourly(BTreeMap<(NaiveDate, u32), Vec<f64>>),
}

impl WindScenarios {
    pub fn get(&self, date: NaiveDate, hour: u32) -> Option<&[f64]> {
        match self {
            WindScenarios::Shared(w) => Some(w),
            WindScenarios::Hourly(m) => m.get(&(date, hour)).map(Vec::as_slice),
        }
    }
}

/// Inputs of a historical replay.
#[derive(Debug, Clone)]
pub struct BacktestData {
    /// Realized prices; also the source of price scenarios.
    pub prices: PriceHistory,
    pub wind_scenarios: WindScenarios,
    pub actual_wind: BTreeMap<(NaiveDate, u32), f64>,
    pub lookback_days: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedHour {
    pub date: NaiveDate,
    pub hour: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodResult {
    pub records: Vec<BacktestRecord>,
    pub skipped: Vec<SkippedHour>,
}

enum HourOutcome {
    Record(BacktestRecord),
    Skipped(SkippedHour),
}

/// Replay every hour of `start..=end`.
///
/// `strategy` sees only the scenario set, which is built from prices
/// strictly before the operating day. Hours with incomplete inputs are
/// skipped and listed; strategy errors abort the run.
pub fn run_period<F>(data: &BacktestData, start: NaiveDate, end: NaiveDate, strategy: F) -> Result<PeriodResult, BacktestError>
where
    F: Fn(&ScenarioSet) -> Result<OfferCurve, SolverError> + Sync,
{
    if end < start {
        return Err(BacktestError::EmptyRange { start, end });
    }
    let hours: Vec<(NaiveDate, u32)> = start
        .iter_days()
        .take_while(|d| *d <= end)
        .flat_map(|d| (0..24).map(move |h| (d, h)))
        .collect();

    let outcomes: Vec<HourOutcome> = hours
        .par_iter()
        .map(|&(date, hour)| {
            let skip = |reason: String| Ok(HourOutcome::Skipped(SkippedHour { date, hour, reason }));
            let Some((da, rt)) = data.prices.get(date, hour) else {
                return skip("no realized prices".into());
            };
            let Some(&wind) = data.actual_wind.get(&(date, hour)) else {
                return skip("no realized wind".into());
            };
            let Some(scenario_wind) = data.wind_scenarios.get(date, hour) else {
                return skip("no wind scenarios".into());
            };
            let scenarios =
                match build_historical_scenarios(&data.prices, scenario_wind, date, hour, data.lookback_days) {
                    Ok(s) => s,
                    Err(e) => return skip(e.to_string()),
                };
            let curve = strategy(&scenarios).map_err(|source| BacktestError::Strategy { date, hour, source })?;
            Ok(HourOutcome::Record(run_hour(&curve, date, hour, Actuals { da, rt, wind })))
        })
        .collect::<Result<_, BacktestError>>()?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            HourOutcome::Record(r) => records.push(r),
            HourOutcome::Skipped(s) => skipped.push(s),
        }
    }
    Ok(PeriodResult { records, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub total_regret: f64,
    /// Mean over days of the sample standard deviation of hourly regret.
    pub mean_daily_regret_std: f64,
    pub hours: usize,
    pub days: usize,
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn aggregate(records: &[BacktestRecord]) -> Result<RegretSummary, BacktestError> {
    if records.is_empty() {
        return Err(BacktestError::NoRecords);
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_day.entry(r.date).or_default().push(r.regret);
    }
    let stds: Vec<f64> = by_day.values().map(|v| sample_std(v)).collect();
    Ok(RegretSummary {
        total_regret: records.iter().map(|r| r.regret).sum(),
        mean_daily_regret_std: stds.iter().sum::<f64>() / stds.len() as f64,
        hours: records.len(),
        days: by_day.len(),
    })
}

/// Per-strategy summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub beta_or_percentile: f64,
    pub total_regret: f64,
    pub mean_daily_regret_std: f64,
    pub hours: usize,
    pub days: usize,
    pub skipped_hours: Vec<String>,
}

impl StrategySummary {
    pub fn new(strategy: &str, parameter: f64, summary: RegretSummary, skipped: &[SkippedHour]) -> Self {
        StrategySummary {
            strategy: strategy.to_string(),
            beta_or_percentile: parameter,
            total_regret: summary.total_regret,
            mean_daily_regret_std: summary.mean_daily_regret_std,
            hours: summary.hours,
            days: summary.days,
            skipped_hours: skipped.iter().map(|s| format!("{} {:02}: {}", s.date, s.hour, s.reason)).collect(),
        }
    }
}

pub fn write_records<W: Write>(records: &[BacktestRecord], writer: W) -> Result<(), BacktestError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(records: &[BacktestRecord], path: impl AsRef<Path>) -> Result<(), BacktestError> {
    write_records(records, File::create(path)?)
}

fn parse_err(name: &str, record: &csv::StringRecord, message: String) -> BacktestError {
    BacktestError::Parse {
        path: name.to_string(),
        line: record.position().map_or(0, |p| p.line()),
        message,
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &str) -> Result<usize, BacktestError> {
    headers.iter().position(|h| h == name).ok_or_else(|| BacktestError::Parse {
        path: path.to_string(),
        line: 1,
        message: format!("missing column `{name}`"),
    })
}

/// Rows of `date,hour,<value>`; repeated keys accumulate in file order.
type HourlyValues = Vec<((NaiveDate, u32), f64)>;

fn read_hourly<R: Read>(reader: R, name: &str, value: &str) -> Result<HourlyValues, BacktestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (di, hi, vi) = (
        column(&headers, "date", name)?,
        column(&headers, "hour", name)?,
        column(&headers, value, name)?,
    );
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(di), "%Y-%m-%d")
            .map_err(|e| parse_err(name, &record, format!("bad date `{}`: {e}", field(di))))?;
        let hour: u32 = field(hi)
            .parse()
            .ok()
            .filter(|h| *h < 24)
            .ok_or_else(|| parse_err(name, &record, format!("bad hour `{}`", field(hi))))?;
        let v: f64 = field(vi)
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| parse_err(name, &record, format!("bad {value} `{}`", field(vi))))?;
        out.push(((date, hour), v));
    }
    Ok(out)
}

/// Read `date,hour,actual_wind`.
pub fn read_actual_wind<R: Read>(reader: R, name: &str) -> Result<BTreeMap<(NaiveDate, u32), f64>, BacktestError> {
    Ok(read_hourly(reader, name, "actual_wind")?.into_iter().collect())
}

pub fn load_actual_wind_csv(path: impl AsRef<Path>) -> Result<BTreeMap<(NaiveDate, u32), f64>, BacktestError> {
    let path = path.as_ref();
    read_actual_wind(File::open(path)?, &path.display().to_string())
}

/// Read `date,hour,p_max_wind` with one row per scenario.
pub fn read_hourly_wind_scenarios<R: Read>(reader: R, name: &str) -> Result<WindScenarios, BacktestError> {
    let mut map: BTreeMap<(NaiveDate, u32), Vec<f64>> = BTreeMap::new();
    for (key, v) in read_hourly(reader, name, "p_max_wind")? {
        map.entry(key).or_default().push(v);
    }
    Ok(WindScenarios::Hourly(map))
}

/// Load wind scenarios: a `date,hour,p_max_wind` table, or a plain
/// `p_max_wind` column shared by every hour.
pub fn load_wind_scenarios(path: impl AsRef<Path>) -> Result<WindScenarios, BacktestError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or("");
    if header.split(',').any(|h| h.trim() == "date") {
        read_hourly_wind_scenarios(text.as_bytes(), &name)
    } else {
        Ok(WindScenarios::Shared(crate::scenario::read_wind(text.as_bytes(), &name)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn rec(date: &str, regret: f64) -> BacktestRecord {
        BacktestRecord {
            date: d(date),
            hour: 0,
            actual_da: 0.0,
            actual_rt: 0.0,
            actual_wind: 0.0,
            cleared_mw: 0.0,
            profit: 0.0,
            ideal_profit: regret,
            regret,
        }
    }

    #[test]
    fn ideal_profit_examples() {
        assert_eq!(ideal_profit(10.0, 20.0, 100.0), 2000.0);
        assert_eq!(ideal_profit(10.0, 20.0, 0.0), 0.0);
        assert_eq!(ideal_profit(30.0, 30.0, 50.0), 1500.0);
    }

    #[test]
    fn run_hour_examples() {
        let full = OfferCurve::single(0.0, 100.0).unwrap();
        let a = Actuals {
            da: 10.0,
            rt: 20.0,
            wind: 100.0,
        };
        let r = run_hour(&full, d("2019-10-01"), 3, a);
        assert_eq!((r.cleared_mw, r.profit, r.ideal_profit, r.regret), (100.0, 1000.0, 2000.0, 1000.0));

        let r = run_hour(&OfferCurve::empty(), d("2019-10-01"), 3, a);
        assert_eq!(r.profit, 2000.0);
        assert_eq!(r.regret, 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate(&[rec("2019-10-01", 0.0), rec("2019-10-01", 10.0)]).unwrap();
        assert_relative_eq!(s.mean_daily_regret_std, 50f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.total_regret, 10.0);

        let equal: Vec<_> = ["2019-10-01", "2019-10-02"]
            .iter()
            .flat_map(|day| (0..24).map(move |_| rec(day, 3.0)))
            .collect();
        let s = aggregate(&equal).unwrap();
        assert_eq!(s.total_regret, 24.0 * 2.0 * 3.0);
        assert_eq!(s.mean_daily_regret_std, 0.0);
        assert_eq!(s.days, 2);

        let single = aggregate(&[rec("2019-10-01", 4.0)]).unwrap();
        assert_eq!(single.mean_daily_regret_std, 0.0);
        assert!(matches!(aggregate(&[]), Err(BacktestError::NoRecords)));
    }

    #[test]
    fn hourly_inputs_parse() {
        let text = "date,hour,p_max_wind\n2019-10-01,0,5\n2019-10-01,0,7\n2019-10-01,1,9\n";
        let WindScenarios::Hourly(m) = read_hourly_wind_scenarios(text.as_bytes(), "w").unwrap() else {
            panic!("expected hourly table");
        };
        assert_eq!(m[&(d("2019-10-01"), 0)], vec![5.0, 7.0]);
        let bad = "date,hour,actual_wind\n2019-10-01,24,5\n";
        assert!(read_actual_wind(bad.as_bytes(), "a").is_err());
    }

    #[test]
    fn records_csv_header() {
        let mut buf = Vec::new();
        write_records(&[rec("2019-10-01", 1.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("date,hour,actual_da,actual_rt,actual_wind,cleared_mw,profit,ideal_profit,regret\n"));
        assert!(text.contains("2019-10-01,0,"));
    }
}
