//! Joint day-ahead price, real-time price and wind scenarios.
//!
//! A [`ScenarioSet`] is always kept in canonical order: ascending day-ahead
//! price, ties broken by real-time price and then by maximum wind. The solver
//! relies on this order to express clearing sets as suffixes of the list.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for the symmetry and positive-semidefiniteness checks.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario set is empty")]
    Empty,
    #[error("scenario {index}: {field} is not finite")]
    NotFinite { index: usize, field: &'static str },
    #[error("scenario {index}: p_max_wind = {value} is negative")]
    NegativeWind { index: usize, value: f64 },
    #[error("covariance matrix is not symmetric: {matrix:?}")]
    NotSymmetric { matrix: [[f64; 3]; 3] },
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue}): {matrix:?}")]
    NotPsd { matrix: [[f64; 3]; 3], min_eigenvalue: f64 },
    #[error("invalid gaussian spec: {0}")]
    InvalidSpec(String),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: &'static str },
    #[error("price history is missing hour {hour} on {} date(s): {}", .dates.len(), format_dates(.dates))]
    MissingHistory { hour: u32, dates: Vec<NaiveDate> },
    #[error("wind scenario list is empty")]
    NoWind,
    #[error("lookback window must contain at least one day")]
    ZeroLookback,
    #[error("hour {0} is outside 0..=23")]
    BadHour(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_dates(dates: &[NaiveDate]) -> String {
    dates
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// One joint sample of day-ahead price, real-time price ($/MWh) and maximum
/// dispatchable wind (MW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub lambda_da: f64,
    pub lambda_rt: f64,
    pub p_max_wind: f64,
}

impl Scenario {
    pub fn new(lambda_da: f64, lambda_rt: f64, p_max_wind: f64) -> Result<Self, ScenarioError> {
        let s = Scenario {
            lambda_da,
            lambda_rt,
            p_max_wind,
        };
        s.validate(0)?;
        Ok(s)
    }

    fn validate(&self, index: usize) -> Result<(), ScenarioError> {
        for (field, v) in [
            ("lambda_da", self.lambda_da),
            ("lambda_rt", self.lambda_rt),
            ("p_max_wind", self.p_max_wind),
        ] {
            if !v.is_finite() {
                return Err(ScenarioError::NotFinite { index, field });
            }
        }
        if self.p_max_wind < 0.0 {
            return Err(ScenarioError::NegativeWind {
                index,
                value: self.p_max_wind,
            });
        }
        Ok(())
    }

    /// Canonical order: day-ahead price, then real-time price, then wind.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.lambda_da
            .total_cmp(&other.lambda_da)
            .then(self.lambda_rt.total_cmp(&other.lambda_rt))
            .then(self.p_max_wind.total_cmp(&other.p_max_wind))
    }
}

/// A nonempty, canonically sorted, equally weighted set of scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(mut scenarios: Vec<Scenario>) -> Result<Self, ScenarioError> {
        if scenarios.is_empty() {
            return Err(ScenarioError::Empty);
        }
        for (i, s) in scenarios.iter().enumerate() {
            s.validate(i)?;
        }
        scenarios.sort_by(Scenario::canonical_cmp);
        Ok(ScenarioSet { scenarios })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Probability of each scenario.
    pub fn weight(&self) -> f64 {
        1.0 / self.scenarios.len() as f64
    }

    pub fn as_slice(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Scenario> {
        self.scenarios.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Scenario> {
        self.scenarios.get(index)
    }

    pub fn max_wind(&self) -> f64 {
        self.scenarios
            .iter()
            .map(|s| s.p_max_wind)
            .fold(0.0, f64::max)
    }

    pub fn max_lambda_da(&self) -> f64 {
        self.scenarios[self.scenarios.len() - 1].lambda_da
    }

    pub fn min_lambda_da(&self) -> f64 {
        self.scenarios[0].lambda_da
    }

    /// Largest absolute price (day-ahead or real-time) in the set.
    pub fn max_abs_price(&self) -> f64 {
        self.scenarios
            .iter()
            .map(|s| s.lambda_da.abs().max(s.lambda_rt.abs()))
            .fold(0.0, f64::max)
    }

    pub fn has_negative_prices(&self) -> bool {
        self.scenarios
            .iter()
            .any(|s| s.lambda_da < 0.0 || s.lambda_rt < 0.0)
    }

    /// Copy of the set with negative prices replaced by zero.
    pub fn clamp_negative_prices(&self) -> ScenarioSet {
        let scenarios = self
            .scenarios
            .iter()
            .map(|s| Scenario {
                lambda_da: s.lambda_da.max(0.0),
                lambda_rt: s.lambda_rt.max(0.0),
                p_max_wind: s.p_max_wind,
            })
            .collect();
        // Clamping can create new day-ahead ties, so re-sort.
        ScenarioSet::new(scenarios).expect("clamping preserves validity")
    }

    /// Per-coordinate sample mean `(lambda_da, lambda_rt, p_max_wind)`.
    pub fn mean(&self) -> [f64; 3] {
        let n = self.len() as f64;
        let mut m = [0.0; 3];
        for s in &self.scenarios {
            m[0] += s.lambda_da;
            m[1] += s.lambda_rt;
            m[2] += s.p_max_wind;
        }
        m.map(|v| v / n)
    }

    /// Sample covariance (n - 1 denominator; zero for a single scenario).
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let m = self.mean();
        let mut c = [[0.0; 3]; 3];
        if self.len() < 2 {
            return c;
        }
        for s in &self.scenarios {
            let d = [s.lambda_da - m[0], s.lambda_rt - m[1], s.p_max_wind - m[2]];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] += d[i] * d[j];
                }
            }
        }
        let denom = (self.len() - 1) as f64;
        c.map(|row| row.map(|v| v / denom))
    }
}

impl<'a> IntoIterator for &'a ScenarioSet {
    type Item = &'a Scenario;
    type IntoIter = std::slice::Iter<'a, Scenario>;

    fn into_iter(self) -> Self::IntoIter {
        self.scenarios.iter()
    }
}

/// Mean and covariance of the joint `(lambda_da, lambda_rt, p_max_wind)`
/// normal distribution used for synthetic scenario sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    mean: [f64; 3],
    covariance: [[f64; 3]; 3],
}

impl GaussianSpec {
    pub fn new(mean: [f64; 3], covariance: [[f64; 3]; 3]) -> Result<Self, ScenarioError> {
        if mean.iter().any(|v| !v.is_finite()) || covariance.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(ScenarioError::InvalidSpec(
                "mean and covariance entries must be finite".into(),
            ));
        }
        let scale = covariance
            .iter()
            .flatten()
            .fold(1.0_f64, |acc, v| acc.max(v.abs()));
        for i in 0..3 {
            for j in (i + 1)..3 {
                if (covariance[i][j] - covariance[j][i]).abs() > PSD_TOLERANCE * scale {
                    return Err(ScenarioError::NotSymmetric { matrix: covariance });
                }
            }
        }
        let min_eigenvalue = SymmetricEigen::new(Matrix3::from(covariance).transpose())
            .eigenvalues
            .min();
        if min_eigenvalue < -PSD_TOLERANCE * scale {
            return Err(ScenarioError::NotPsd {
                matrix: covariance,
                min_eigenvalue,
            });
        }
        Ok(GaussianSpec { mean, covariance })
    }

    /// The synthetic cases: means (30, 30, 100), unit variances of 100 and a
    /// single nonzero covariance between real-time price and wind.
    pub fn synthetic_case(cov_rt_wind: f64) -> Result<Self, ScenarioError> {
        GaussianSpec::new(
            [30.0, 30.0, 100.0],
            [
                [100.0, 0.0, 0.0],
                [0.0, 100.0, cov_rt_wind],
                [0.0, cov_rt_wind, 100.0],
            ],
        )
    }

    /// Real-time price and wind negatively correlated.
    pub fn case1() -> Self {
        Self::synthetic_case(-80.0).expect("case 1 covariance is PSD")
    }

    /// Real-time price and wind positively correlated.
    pub fn case2() -> Self {
        Self::synthetic_case(80.0).expect("case 2 covariance is PSD")
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        self.covariance
    }

    /// A factor `A` with `A Aᵀ = covariance`, from the symmetric eigen
    /// decomposition. Works for singular (semidefinite) matrices.
    fn factor(&self) -> Matrix3<f64> {
        let eig = SymmetricEigen::new(Matrix3::from(self.covariance).transpose());
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        eig.eigenvectors * Matrix3::from_diagonal(&sqrt)
    }
}

/// Draw `n` unclamped samples `(lambda_da, lambda_rt, p_max_wind)`.
pub fn sample_gaussian_raw(
    spec: &GaussianSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::ZeroSamples);
    }
    let factor = spec.factor();
    let mean = Vector3::from(spec.mean);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws = (0..n)
        .map(|_| {
            let z = Vector3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            let x = mean + factor * z;
            [x[0], x[1], x[2]]
        })
        .collect();
    Ok(draws)
}

/// Sample a scenario set. Negative wind draws are clamped to 0 MW.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Result<ScenarioSet, ScenarioError> {
    let draws = sample_gaussian_raw(spec, n, seed)?;
    let scenarios = draws
        .into_iter()
        .map(|[da, rt, wind]| Scenario {
            lambda_da: da,
            lambda_rt: rt,
            p_max_wind: wind.max(0.0),
        })
        .collect();
    ScenarioSet::new(scenarios)
}

fn column_index(
    headers: &csv::StringRecord,
    column: &'static str,
    path: &str,
) -> Result<usize, ScenarioError> {
    headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| ScenarioError::MissingColumn {
            path: path.to_string(),
            column,
        })
}

fn parse_field(
    record: &csv::StringRecord,
    idx: usize,
    column: &str,
    path: &str,
) -> Result<f64, ScenarioError> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).ok_or_else(|| ScenarioError::Parse {
        path: path.to_string(),
        line,
        message: format!("missing value for `{column}`"),
    })?;
    let v: f64 = raw.trim().parse().map_err(|_| ScenarioError::Parse {
        path: path.to_string(),
        line,
        message: format!("cannot parse `{raw}` as a number for `{column}`"),
    })?;
    if !v.is_finite() {
        return Err(ScenarioError::Parse {
            path: path.to_string(),
            line,
            message: format!("`{column}` must be finite"),
        });
    }
    Ok(v)
}

/// Read `lambda_da,lambda_rt,p_max_wind` rows.
pub fn read_scenarios<R: Read>(reader: R, name: &str) -> Result<ScenarioSet, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let da = column_index(&headers, "lambda_da", name)?;
    let rt = column_index(&headers, "lambda_rt", name)?;
    let wind = column_index(&headers, "p_max_wind", name)?;
    let mut scenarios = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let s = Scenario {
            lambda_da: parse_field(&record, da, "lambda_da", name)?,
            lambda_rt: parse_field(&record, rt, "lambda_rt", name)?,
            p_max_wind: parse_field(&record, wind, "p_max_wind", name)?,
        };
        if s.p_max_wind < 0.0 {
            return Err(ScenarioError::Parse {
                path: name.to_string(),
                line,
                message: format!("p_max_wind = {} is negative", s.p_max_wind),
            });
        }
        scenarios.push(s);
    }
    ScenarioSet::new(scenarios)
}

pub fn load_scenarios_csv(path: impl AsRef<Path>) -> Result<ScenarioSet, ScenarioError> {
    let path = path.as_ref();
    read_scenarios(File::open(path)?, &path.display().to_string())
}

pub fn write_scenarios<W: Write>(set: &ScenarioSet, writer: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lambda_da", "lambda_rt", "p_max_wind"])?;
    for s in set {
        w.write_record([
            s.lambda_da.to_string(),
            s.lambda_rt.to_string(),
            s.p_max_wind.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenarios_csv(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_scenarios(set, File::create(path)?)
}

/// Read a `p_max_wind` column of wind scenarios.
pub fn read_wind<R: Read>(reader: R, name: &str) -> Result<Vec<f64>, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = column_index(&headers, "p_max_wind", name)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let v = parse_field(&record, idx, "p_max_wind", name)?;
        if v < 0.0 {
            return Err(ScenarioError::Parse {
                path: name.to_string(),
                line: record.position().map_or(0, |p| p.line()),
                message: format!("p_max_wind = {v} is negative"),
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(ScenarioError::NoWind);
    }
    Ok(out)
}

pub fn load_wind_csv(path: impl AsRef<Path>) -> Result<Vec<f64>, ScenarioError> {
    let path = path.as_ref();
    read_wind(File::open(path)?, &path.display().to_string())
}

/// Hourly day-ahead and real-time prices keyed by `(date, hour)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceHistory {
    prices: BTreeMap<(NaiveDate, u32), (f64, f64)>,
}

impl PriceHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, date: NaiveDate, hour: u32, lambda_da: f64, lambda_rt: f64) -> Result<(), ScenarioError> {
        if hour > 23 {
            return Err(ScenarioError::BadHour(hour));
        }
        self.prices.insert((date, hour), (lambda_da, lambda_rt));
        Ok(())
    }

    /// `(lambda_da, lambda_rt)` at the given date and hour.
    pub fn get(&self, date: NaiveDate, hour: u32) -> Option<(f64, f64)> {
        self.prices.get(&(date, hour)).copied()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Dates in `[target - lookback, target)` lacking a price at `hour`.
    pub fn missing_in_window(&self, target_date: NaiveDate, hour: u32, lookback_days: u32) -> Vec<NaiveDate> {
        lookback_dates(target_date, lookback_days)
            .filter(|d| !self.prices.contains_key(&(*d, hour)))
            .collect()
    }
}

/// The `lookback_days` calendar days before `target_date`, oldest first.
fn lookback_dates(target_date: NaiveDate, lookback_days: u32) -> impl Iterator<Item = NaiveDate> {
    (1..=lookback_days as i64)
        .rev()
        .map(move |d| target_date - Duration::days(d))
}

/// Read `date,hour,lambda_da,lambda_rt` rows with ISO-8601 dates.
pub fn read_price_history<R: Read>(reader: R, name: &str) -> Result<PriceHistory, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = column_index(&headers, "date", name)?;
    let hour_idx = column_index(&headers, "hour", name)?;
    let da = column_index(&headers, "lambda_da", name)?;
    let rt = column_index(&headers, "lambda_rt", name)?;
    let mut history = PriceHistory::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| ScenarioError::Parse {
            path: name.to_string(),
            line,
            message,
        };
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| err(format!("bad date `{raw_date}`: {e}")))?;
        let raw_hour = record.get(hour_idx).unwrap_or("");
        let hour: u32 = raw_hour
            .parse()
            .map_err(|_| err(format!("bad hour `{raw_hour}`")))?;
        if hour > 23 {
            return Err(err(format!("hour {hour} is outside 0..=23")));
        }
        let lambda_da = parse_field(&record, da, "lambda_da", name)?;
        let lambda_rt = parse_field(&record, rt, "lambda_rt", name)?;
        history.insert(date, hour, lambda_da, lambda_rt)?;
    }
    Ok(history)
}

pub fn load_price_history_csv(path: impl AsRef<Path>) -> Result<PriceHistory, ScenarioError> {
    let path = path.as_ref();
    read_price_history(File::open(path)?, &path.display().to_string())
}

/// Historical price pairs `(lambda_da, lambda_rt)` at `target_hour` for the
/// `lookback_days` days before `target_date`, oldest first.
pub fn historical_price_pairs(
    history: &PriceHistory,
    target_date: NaiveDate,
    target_hour: u32,
    lookback_days: u32,
) -> Result<Vec<(f64, f64)>, ScenarioError> {
    if target_hour > 23 {
        return Err(ScenarioError::BadHour(target_hour));
    }
    if lookback_days == 0 {
        return Err(ScenarioError::ZeroLookback);
    }
    let missing = history.missing_in_window(target_date, target_hour, lookback_days);
    if !missing.is_empty() {
        return Err(ScenarioError::MissingHistory {
            hour: target_hour,
            dates: missing,
        });
    }
    Ok(lookback_dates(target_date, lookback_days)
        .map(|d| history.get(d, target_hour).expect("checked above"))
        .collect())
}

/// Pair historical prices with wind scenarios by cyclic assignment: scenario
/// `k` takes price day `k mod days` and wind value `k mod |wind|`, giving
/// `max(days, |wind|)` scenarios.
pub fn pair_cyclic(price_pairs: &[(f64, f64)], wind: &[f64]) -> Result<ScenarioSet, ScenarioError> {
    if wind.is_empty() {
        return Err(ScenarioError::NoWind);
    }
    if price_pairs.is_empty() {
        return Err(ScenarioError::ZeroLookback);
    }
    let count = price_pairs.len().max(wind.len());
    let scenarios = (0..count)
        .map(|k| {
            let (da, rt) = price_pairs[k % price_pairs.len()];
            Scenario {
                lambda_da: da,
                lambda_rt: rt,
                p_max_wind: wind[k % wind.len()],
            }
        })
        .collect();
    ScenarioSet::new(scenarios)
}

/// Build the scenario set for one operating hour from prices strictly before
/// `target_date`.
pub fn build_historical_scenarios(
    history: &PriceHistory,
    wind_scenarios: &[f64],
    target_date: NaiveDate,
    target_hour: u32,
    lookback_days: u32,
) -> Result<ScenarioSet, ScenarioError> {
    if wind_scenarios.is_empty() {
        return Err(ScenarioError::NoWind);
    }
    let pairs = historical_price_pairs(history, target_date, target_hour, lookback_days)?;
    pair_cyclic(&pairs, wind_scenarios)
}
