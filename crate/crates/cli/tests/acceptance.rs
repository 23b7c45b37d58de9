//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always reach
//! stdout. Exits nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tempfile::tempdir;
use windbid::backtest::{ideal_profit, run_hour, Actuals};
use windbid::risk::cvar;
use windbid::scenario::sample_gaussian;
use windbid::solver::{write_miqp, Engine};
use windbid::*;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Row = (String, Vec<(f64, String)>, String, f64);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set_of(rows: &[(f64, f64, f64)]) -> ScenarioSet {
    ScenarioSet::new(rows.iter().map(|&(a, b, c)| Scenario::new(a, b, c).unwrap()).collect()).unwrap()
}

/// Nonnegative prices with frequent ties in the day-ahead price.
fn random_rows(rng: &mut ChaCha8Rng, n: usize, decimals: Option<f64>) -> Vec<(f64, f64, f64)> {
    (0..n)
        .map(|_| {
            let mut da = if rng.gen_bool(0.3) {
                rng.gen_range(0..5) as f64 * 10.0
            } else {
                rng.gen_range(0.0..60.0)
            };
            let mut rt = rng.gen_range(0.0..80.0);
            if let Some(scale) = decimals {
                da = (da * scale).round() / scale;
                rt = (rt * scale).round() / scale;
            }
            (da, rt, rng.gen_range(0.0..120.0))
        })
        .collect()
}

fn options(n_segments: usize, beta: f64) -> SolveOptions {
    SolveOptions::new(n_segments, RiskSpec::new(beta).unwrap())
}

fn case_set(case2: bool, n: usize, seed: u64) -> ScenarioSet {
    let spec = if case2 { GaussianSpec::case2() } else { GaussianSpec::case1() };
    sample_gaussian(&spec, n, seed).unwrap().clamp_negative_prices()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let betas = [0.0, 0.25, 0.5, 0.75, 0.9];
    let mut worst_gap: f64 = 0.0;
    for case in 0..200 {
        let n = rng.gen_range(3..=8);
        let k = rng.gen_range(1..=2);
        let beta = betas[case % betas.len()];
        let s = set_of(&random_rows(&mut rng, n, None));
        let opts = options(k, beta);
        let step = s.max_wind() / 50.0;
        let exact = solve_exact(&s, &opts).map_err(|e| e.to_string())?;
        let brute = solve_bruteforce(&s, &opts, step).map_err(|e| e.to_string())?;
        // Rounding cumulative levels onto the grid moves each scenario profit
        // by at most the steepest profit slope times N steps.
        let lambda_max = s.iter().map(|x| x.lambda_da.max(x.lambda_rt)).fold(0.0, f64::max);
        let allowance = lambda_max * k as f64 * step;
        let tol = 1e-9 * exact.objective.abs().max(1.0);
        check(exact.objective >= brute.objective - tol, || {
            format!("case {case}: exact {} below brute force {}", exact.objective, brute.objective)
        })?;
        check(exact.objective - brute.objective <= allowance + tol, || {
            format!(
                "case {case}: gap {} exceeds {allowance}",
                exact.objective - brute.objective
            )
        })?;
        worst_gap = worst_gap.max((exact.objective - brute.objective) / allowance.max(1e-12));
    }
    Ok(format!("200 instances, largest gap {:.3} of the allowance", worst_gap))
}

/// Best mean profit over nondecreasing cleared levels per price group with
/// at most `k` increases from zero, levels drawn from {0, cap, winds}.
fn mean_oracle(s: &ScenarioSet, k: usize) -> f64 {
    let cap = s.max_wind();
    let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    let mut rows: Vec<&Scenario> = s.iter().collect();
    rows.sort_by(|a, b| a.lambda_da.total_cmp(&b.lambda_da));
    for r in rows {
        match groups.last_mut() {
            Some((p, g)) if *p == r.lambda_da => g.push((r.lambda_rt, r.p_max_wind)),
            _ => groups.push((r.lambda_da, vec![(r.lambda_rt, r.p_max_wind)])),
        }
    }
    let mut levels: Vec<f64> = vec![0.0, cap];
    levels.extend(s.iter().map(|r| r.p_max_wind.min(cap)));
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let value = |g: usize, level: f64| -> f64 {
        let (da, ref members) = groups[g];
        members
            .iter()
            .map(|&(rt, w)| da * level + rt * (w - level).min(0.0))
            .sum()
    };

    fn walk(
        g: usize,
        current: f64,
        jumps_left: usize,
        groups: usize,
        levels: &[f64],
        value: &dyn Fn(usize, f64) -> f64,
    ) -> f64 {
        if g == groups {
            return 0.0;
        }
        let mut best = value(g, current) + walk(g + 1, current, jumps_left, groups, levels, value);
        if jumps_left > 0 {
            for &l in levels.iter().filter(|&&l| l > current) {
                best = best.max(value(g, l) + walk(g + 1, l, jumps_left - 1, groups, levels, value));
            }
        }
        best
    }

    walk(0, 0.0, k, groups.len(), &levels, &value) / s.len() as f64
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.gen_range(3..=9);
        let k = rng.gen_range(1..=3);
        let s = set_of(&random_rows(&mut rng, n, None));
        let exact = solve_exact(&s, &options(k, 0.0)).map_err(|e| e.to_string())?;
        let oracle = mean_oracle(&s, k);
        let rel = (exact.objective - oracle).abs() / oracle.abs().max(1.0);
        worst = worst.max(rel);
        check(rel <= 1e-6, || {
            format!("case {case}: exact {} vs mean oracle {oracle} (n={n}, N={k})", exact.objective)
        })?;
    }
    Ok(format!("50 instances, max relative difference {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut fractional = 0;
    for case in 0..100 {
        let n = rng.gen_range(1..=40);
        let beta = if case % 2 == 0 {
            rng.gen_range(0.0..0.99)
        } else {
            [0.0, 0.5, 0.8, 0.9, 0.95][case % 5]
        };
        let m = (1.0 - beta) * n as f64;
        if (m - m.round()).abs() > 1e-6 {
            fractional += 1;
        }
        // Profit range at most 10, so one grid step is at most 1e-3 and the
        // scan's left neighbour of the maximizer loses at most that much.
        let profits: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let sorted_tail = cvar(&profits, RiskSpec::new(beta).unwrap()).map_err(|e| e.to_string())?;

        let lo = profits.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = profits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let step = 1e-4 * (hi - lo);
        let epigraph = |a: f64| a - profits.iter().map(|&f| (a - f).max(0.0)).sum::<f64>() / m;
        let scan = (0..=10_000)
            .map(|i| epigraph(lo + step * i as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        let diff = (sorted_tail - scan).abs();
        worst = worst.max(diff);
        check(diff <= 1e-3, || {
            format!("case {case}: sorted {sorted_tail} vs epigraph scan {scan} (n={n}, beta={beta})")
        })?;
    }
    check(fractional >= 20, || format!("only {fractional} vectors had a fractional tail"))?;
    Ok(format!("100 vectors ({fractional} fractional tails), max difference {worst:.2e}"))
}

fn invariant_violations(s: &ScenarioSet, k: usize, report: &SolveReport) -> Vec<String> {
    let mut bad = Vec::new();
    let cap = s.max_wind();
    let segs = report.curve.segments();
    let total: f64 = segs.iter().map(|x| x.quantity).sum();
    if total > cap * (1.0 + 1e-9) + 1e-9 {
        bad.push(format!("offered {total} exceeds cap {cap}"));
    }
    if segs.len() > k {
        bad.push(format!("{} segments for N={k}", segs.len()));
    }
    for w in segs.windows(2) {
        if w[1].price < w[0].price {
            bad.push(format!("prices {} then {}", w[0].price, w[1].price));
        }
    }
    if segs.iter().any(|x| x.quantity < 0.0) {
        bad.push("negative quantity".into());
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.get(a).unwrap().lambda_da.total_cmp(&s.get(b).unwrap().lambda_da));
    let mut previous = 0;
    for &w in &order {
        let scen = s.get(w).unwrap();
        let u = &report.per_scenario[w].indicator;
        let expected: Vec<bool> = segs.iter().map(|x| x.price <= scen.lambda_da).collect();
        if *u != expected {
            bad.push(format!("scenario {w}: indicator {u:?} does not match clearing"));
        }
        let ones = u.iter().take_while(|&&b| b).count();
        if u[ones..].iter().any(|&b| b) {
            bad.push(format!("scenario {w}: indicator {u:?} is not a staircase"));
        }
        if ones < previous {
            bad.push(format!("scenario {w}: clears fewer segments than a cheaper scenario"));
        }
        previous = ones;
        let cleared: f64 = segs.iter().zip(u).filter(|(_, &b)| b).map(|(x, _)| x.quantity).sum();
        if (cleared - report.per_scenario[w].cleared_mw).abs() > 1e-9 * cap.max(1.0) {
            bad.push(format!("scenario {w}: cleared {} vs {cleared}", report.per_scenario[w].cleared_mw));
        }
    }
    bad
}

fn criterion_4() -> Outcome {
    let mut fixtures: Vec<(String, ScenarioSet)> = vec![
        ("case1".into(), case_set(false, 250, 1)),
        ("case2".into(), case_set(true, 250, 1)),
        ("one".into(), set_of(&[(30.0, 30.0, 100.0)])),
        ("two".into(), set_of(&[(10.0, 50.0, 0.0), (30.0, 30.0, 100.0)])),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for i in 0..30 {
        let n = rng.gen_range(1..=12);
        fixtures.push((format!("random{i}"), set_of(&random_rows(&mut rng, n, None))));
    }
    let mut outputs = 0;
    for (name, s) in &fixtures {
        for &beta in &[0.0, 0.5, 0.9, 0.95] {
            for &k in &[1, 3, 6] {
                let mut engines = vec![Engine::Levels];
                if s.len() <= 12 && k <= 3 {
                    engines.push(Engine::Breakpoints);
                }
                for engine in engines {
                    for width in [0.0, 1.0] {
                        let mut opts = options(k, beta);
                        opts.engine = engine;
                        opts.min_segment_width_mw = width;
                        let report = solve_exact(s, &opts).map_err(|e| format!("{name}: {e}"))?;
                        let bad = invariant_violations(s, k, &report);
                        check(bad.is_empty(), || {
                            format!("{name} beta={beta} N={k} {engine:?}: {}", bad.join("; "))
                        })?;
                        outputs += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{outputs} solver outputs, zero violations"))
}

fn criterion_5() -> Outcome {
    let s = case_set(false, 250, 1);
    let neutral = solve_exact(&s, &options(6, 0.0)).map_err(|e| e.to_string())?;
    let averse = solve_exact(&s, &options(6, 0.9)).map_err(|e| e.to_string())?;
    let (a, b) = (neutral.total_offered(), averse.total_offered());
    check(b <= a - 1.0, || format!("offered {b:.3} MW at beta 0.9 vs {a:.3} MW at beta 0"))?;
    Ok(format!("offered {a:.3} MW at beta 0, {b:.3} MW at beta 0.9"))
}

fn criterion_6() -> Outcome {
    let s = case_set(true, 250, 1);
    let report = solve_exact(&s, &options(6, 0.9)).map_err(|e| e.to_string())?;
    check(!report.tail_indices.is_empty(), || "empty tail".into())?;
    let mean = |idx: &mut dyn Iterator<Item = &Scenario>| {
        let (mut sum, mut count) = ([0.0; 3], 0.0);
        for x in idx {
            sum[0] += x.lambda_da;
            sum[1] += x.lambda_rt;
            sum[2] += x.p_max_wind;
            count += 1.0;
        }
        sum.map(|v| v / count)
    };
    let full = mean(&mut s.iter());
    let tail = mean(&mut report.tail_indices.iter().map(|&i| s.get(i).unwrap()));
    let names = ["lambda_da", "lambda_rt", "p_max_wind"];
    for j in 0..3 {
        check(tail[j] < full[j], || {
            format!("{} tail mean {:.3} not below full mean {:.3}", names[j], tail[j], full[j])
        })?;
    }
    Ok(format!(
        "{} active samples; tail means ({:.2}, {:.2}, {:.2}) vs full ({:.2}, {:.2}, {:.2})",
        report.tail_indices.len(),
        tail[0],
        tail[1],
        tail[2],
        full[0],
        full[1],
        full[2]
    ))
}

fn criterion_7() -> Outcome {
    // DA 2, RT 0, 100 MW realized: ideal 200. A 75 MW block clears and the
    // 25 MW surplus earns nothing in real time: profit 150.
    let curve = OfferCurve::single(0.0, 75.0).map_err(|e| e.to_string())?;
    let rec = run_hour(&curve, date("2019-10-01"), 0, Actuals { da: 2.0, rt: 0.0, wind: 100.0 });
    check(rec.ideal_profit == 200.0, || format!("ideal {}", rec.ideal_profit))?;
    check(rec.profit == 150.0, || format!("profit {}", rec.profit))?;
    check(rec.regret == 50.0, || format!("regret {}", rec.regret))?;
    // Ideal uses the better of the two prices.
    check(ideal_profit(10.0, 20.0, 100.0) == 2000.0, || "ideal for DA 10, RT 20, 100 MW".into())?;
    Ok("regret 200 - 150 = 50 exactly".into())
}

struct LpModel {
    objective: Vec<(f64, String)>,
    rows: Vec<Row>,
    bounds: HashMap<String, (f64, f64)>,
    binaries: Vec<String>,
}

fn parse_terms(tokens: &[&str]) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i] {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            t => {
                let c: f64 = t.parse().unwrap_or_else(|_| panic!("coefficient `{t}`"));
                out.push((sign * c, tokens[i + 1].to_string()));
                sign = 1.0;
                i += 1;
            }
        }
        i += 1;
    }
    out
}

fn parse_lp(text: &str) -> LpModel {
    let mut model = LpModel {
        objective: Vec::new(),
        rows: Vec::new(),
        bounds: HashMap::new(),
        binaries: Vec::new(),
    };
    let mut section = "";
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Maximize" | "Subject To" | "Bounds" | "Binaries" | "End" => {
                section = line;
                continue;
            }
            _ => {}
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match section {
            "Maximize" => {
                assert!(!line.contains('['), "unexpected quadratic objective");
                model.objective = parse_terms(&tokens[1..]);
            }
            "Subject To" => {
                let name = tokens[0].trim_end_matches(':').to_string();
                let n = tokens.len();
                let rhs: f64 = tokens[n - 1].parse().unwrap();
                model
                    .rows
                    .push((name, parse_terms(&tokens[1..n - 2]), tokens[n - 2].to_string(), rhs));
            }
            "Bounds" => match tokens.as_slice() {
                [v, "free"] => {
                    model.bounds.insert(v.to_string(), (f64::NEG_INFINITY, f64::INFINITY));
                }
                [v, ">=", lo] => {
                    model.bounds.insert(v.to_string(), (lo.parse().unwrap(), f64::INFINITY));
                }
                [lo, "<=", v, "<=", hi] => {
                    model.bounds.insert(v.to_string(), (lo.parse().unwrap(), hi.parse().unwrap()));
                }
                other => panic!("bound line {other:?}"),
            },
            "Binaries" => model.binaries.extend(tokens.iter().map(|t| t.to_string())),
            _ => panic!("line outside a section: {line}"),
        }
    }
    model
}

/// Values of every model variable implied by a native solution.
fn assignment(s: &ScenarioSet, k: usize, report: &SolveReport, t: f64) -> HashMap<String, f64> {
    let mut x = HashMap::new();
    let top = s.max_lambda_da() + 1.0;
    let mut segs: Vec<Segment> = report.curve.segments().to_vec();
    while segs.len() < k {
        segs.push(Segment { price: top, quantity: 0.0 });
    }
    for (i, seg) in segs.iter().enumerate() {
        x.insert(format!("lam_s{i}"), seg.price);
        x.insert(format!("p_s{i}"), seg.quantity);
    }
    let mut profits = Vec::new();
    for (w, scen) in s.iter().enumerate() {
        let mut cleared = 0.0;
        for (i, seg) in segs.iter().enumerate() {
            let u = if seg.price <= scen.lambda_da { 1.0 } else { 0.0 };
            x.insert(format!("u_w{w}_s{i}"), u);
            x.insert(format!("w_w{w}_s{i}"), u * seg.quantity);
            cleared += u * seg.quantity;
        }
        let d = (scen.p_max_wind - cleared).min(0.0);
        x.insert(format!("d_w{w}"), d);
        profits.push(scen.lambda_da * cleared + scen.lambda_rt * d);
    }
    // The epigraph optimum in alpha sits at one of the profits.
    let value = |a: f64| a - t * profits.iter().map(|&f| (a - f).max(0.0)).sum::<f64>();
    let alpha = profits
        .iter()
        .copied()
        .max_by(|&a, &b| value(a).total_cmp(&value(b)))
        .unwrap();
    x.insert("alpha".into(), alpha);
    for (w, f) in profits.iter().enumerate() {
        x.insert(format!("s_w{w}"), (alpha - f).max(0.0));
    }
    x
}

fn lp_violations(model: &LpModel, x: &HashMap<String, f64>, scale: f64) -> Vec<String> {
    let tol = 1e-6 * scale;
    let mut bad = Vec::new();
    for (name, terms, sense, rhs) in &model.rows {
        let lhs: f64 = terms.iter().map(|(c, v)| c * x[v]).sum();
        let ok = match sense.as_str() {
            "<=" => lhs <= rhs + tol,
            ">=" => lhs >= rhs - tol,
            "=" => (lhs - rhs).abs() <= tol,
            other => panic!("sense {other}"),
        };
        if !ok {
            bad.push(format!("{name}: {lhs} {sense} {rhs}"));
        }
    }
    for (v, &(lo, hi)) in &model.bounds {
        let val = x[v];
        if val < lo - tol || val > hi + tol {
            bad.push(format!("bound {lo} <= {v} = {val} <= {hi}"));
        }
    }
    for v in &model.binaries {
        if x[v] != 0.0 && x[v] != 1.0 {
            bad.push(format!("{v} = {} is not binary", x[v]));
        }
    }
    bad
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let betas = [0.0, 0.5, 0.75, 0.9];
    for case in 0..20 {
        let n = rng.gen_range(2..=6);
        let k = rng.gen_range(1..=3);
        let beta = betas[case % betas.len()];
        let s = set_of(&random_rows(&mut rng, n, Some(10.0)));
        let opts = options(k, beta);
        let report = solve_exact(&s, &opts).map_err(|e| e.to_string())?;
        for redundant in [true, false] {
            let cfg = MiqpExportConfig {
                include_redundant: redundant,
                ..MiqpExportConfig::default()
            };
            let mut buf = Vec::new();
            let stats = write_miqp(&s, &opts, &cfg, &mut buf).map_err(|e| e.to_string())?;
            let model = parse_lp(std::str::from_utf8(&buf).unwrap());

            let extra = if redundant { (n - 1) + (k - 1) + n * (k - 1) } else { 0 };
            let rows = 5 * n * k + 2 * n + 1 + extra;
            check(model.rows.len() == rows && stats.constraints == rows, || {
                format!("case {case}: {} rows written, {} reported, {rows} expected", model.rows.len(), stats.constraints)
            })?;
            check(model.binaries.len() == n * k && stats.binaries == n * k, || {
                format!("case {case}: {} binaries for n={n}, N={k}", model.binaries.len())
            })?;

            let t = model
                .objective
                .iter()
                .find(|(_, v)| v == "s_w0")
                .map(|(c, _)| -c)
                .ok_or("objective has no s_w0 term")?;
            let x = assignment(&s, k, &report, t);
            let scale = s.max_abs_price().max(1.0) * s.max_wind().max(1.0);
            let bad = lp_violations(&model, &x, scale);
            check(bad.is_empty(), || format!("case {case}: {}", bad.join("; ")))?;
            let obj: f64 = model.objective.iter().map(|(c, v)| c * x[v]).sum();
            check((obj - report.objective).abs() <= 1e-6 * report.objective.abs().max(1.0), || {
                format!("case {case}: exported objective {obj} vs {}", report.objective)
            })?;
        }
    }
    Ok("20 instances feasible with and without redundant rows; objectives and counts match".into())
}

fn criterion_9() -> Outcome {
    let mut times = Vec::new();
    let mut nodes = Vec::new();
    for seed in 1..=5 {
        let s = case_set(false, 50, seed);
        let start = Instant::now();
        let report = solve_exact(&s, &options(4, 0.9)).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        nodes.push(report.nodes_explored);
        check(report.proof, || format!("seed {seed}: optimality not proven"))?;
    }
    let mut sorted = times.clone();
    sorted.sort();
    let median = sorted[2];
    check(median < Duration::from_secs(60), || format!("median {median:?}"))?;
    Ok(format!("median {median:.2?} over 5 seeds, nodes_explored {nodes:?}"))
}

fn criterion_10() -> Outcome {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    case_csv(p, "case1.csv", false, 250, 1);
    case_csv(p, "case2.csv", true, 250, 1);
    case_csv(p, "small.csv", false, 30, 2);
    write_json(&p.join("case1.json"), json!({"command": "solve", "scenarios": "case1.csv"}));
    write_json(&p.join("case2.json"), json!({"command": "solve", "scenarios": "case2.csv", "betas": [0.0, 0.9, 0.95]}));
    write_json(
        &p.join("small.json"),
        json!({"command": "solve", "scenarios": "small.csv", "segments": 2, "engine": "breakpoints"}),
    );
    let fx = backtest_fixture(p, date("2019-09-01"), 14, 9);
    write_json(
        &p.join("bt.json"),
        json!({
            "command": "backtest",
            "prices": fx.prices, "wind_scenarios": fx.wind, "actual_wind": fx.actual,
            "start": "2019-09-11", "end": "2019-09-14", "lookback_days": 10,
            "betas": [0.0, 0.9], "percentiles": [0.25, 0.5]
        }),
    );

    let mut compared = 0;
    let runs: [(&str, &str); 4] = [
        ("solve", "case1.json"),
        ("solve", "case2.json"),
        ("solve", "small.json"),
        ("backtest", "bt.json"),
    ];
    for (command, config) in runs {
        let mut outputs = BTreeMap::new();
        for threads in ["1", "4"] {
            let out_dir = format!("{config}.t{threads}");
            let res = windbid(
                &[command, "--config", config, "--clamp-negative-prices", "--threads", threads, "--out", &out_dir],
                p,
            );
            check(res.status.success(), || {
                format!("{command} {config}: {}", String::from_utf8_lossy(&res.stderr))
            })?;
            outputs.insert(threads, (snapshot(&p.join(&out_dir)), res.stdout));
        }
        let (one, many) = (&outputs["1"], &outputs["4"]);
        check(!one.0.is_empty(), || format!("{command} {config}: no output files"))?;
        check(one == many, || format!("{command} {config}: outputs differ between 1 and 4 threads"))?;
        compared += one.0.len();
    }
    Ok(format!("{compared} output files byte-identical across 1 and 4 threads"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 oracle equivalence", criterion_1),
        ("2 beta=0 expectation equivalence", criterion_2),
        ("3 CVaR dual consistency", criterion_3),
        ("4 constraint invariants", criterion_4),
        ("5 Case 1 offers less at high beta", criterion_5),
        ("6 Case 2 tail clustering", criterion_6),
        ("7 regret arithmetic", criterion_7),
        ("8 MIQP export soundness", criterion_8),
        ("9 performance budget", criterion_9),
        ("10 determinism across threads", criterion_10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
