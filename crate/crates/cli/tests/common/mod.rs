#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windbid::scenario::{sample_gaussian, write_scenarios_csv};
use windbid::GaussianSpec;

pub fn windbid(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windbid"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn windbid")
}

pub fn write_json(path: &Path, value: serde_json::Value) -> PathBuf {
    fs::write(path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path.to_path_buf()
}

/// Case 1 or Case 2 scenarios written to `dir/name`.
pub fn case_csv(dir: &Path, name: &str, case2: bool, n: usize, seed: u64) -> PathBuf {
    let spec = if case2 { GaussianSpec::case2() } else { GaussianSpec::case1() };
    let set = sample_gaussian(&spec, n, seed).unwrap();
    let path = dir.join(name);
    write_scenarios_csv(&set, &path).unwrap();
    path
}

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Price history, hourly wind scenarios and actual wind for `days` days
/// starting at `first`, with random but seeded values.
pub struct BacktestFixture {
    pub prices: PathBuf,
    pub wind: PathBuf,
    pub actual: PathBuf,
}

pub fn backtest_fixture(dir: &Path, first: NaiveDate, days: i64, seed: u64) -> BacktestFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = String::from("date,hour,lambda_da,lambda_rt\n");
    let mut wind = String::from("date,hour,p_max_wind\n");
    let mut actual = String::from("date,hour,actual_wind\n");
    for d in 0..days {
        let day = first + Duration::days(d);
        for h in 0..24 {
            let da: f64 = 20.0 + 10.0 * ((h as f64) / 4.0).sin() + rng.gen_range(-5.0..5.0);
            let rt: f64 = da + rng.gen_range(-8.0..8.0);
            prices.push_str(&format!("{day},{h},{:.2},{:.2}\n", da.max(0.0), rt.max(0.0)));
            for _ in 0..6 {
                wind.push_str(&format!("{day},{h},{:.1}\n", rng.gen_range(0.0..100.0)));
            }
            actual.push_str(&format!("{day},{h},{:.1}\n", rng.gen_range(0.0..100.0)));
        }
    }
    let fx = BacktestFixture {
        prices: dir.join("prices.csv"),
        wind: dir.join("wind.csv"),
        actual: dir.join("actual.csv"),
    };
    fs::write(&fx.prices, prices).unwrap();
    fs::write(&fx.wind, wind).unwrap();
    fs::write(&fx.actual, actual).unwrap();
    fx
}

/// Every file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
