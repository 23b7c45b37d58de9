//! Export of the full mixed-integer offer model in LP file format.
//!
//! Products `u · p` are replaced by McCormick variables `w` using the
//! quantity cap as their bound, shortfall is the epigraph `d ≤ 0`,
//! `d ≤ pmax − P` (exact when real-time prices are nonnegative) and CVaR is
//! written in its Rockafellar-Uryasev form.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioSet;

use super::{SolveOptions, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiqpExportConfig {
    /// Indicator constant; `None` uses `2 (max |λDA| + 1)`.
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Weight of `Σ p²` subtracted from the objective; 0 disables it.
    #[serde(default)]
    pub l2_weight: f64,
    /// Emit the row-sum, price-order and nesting families.
    #[serde(default = "default_true")]
    pub include_redundant: bool,
}

fn default_epsilon() -> f64 {
    1e-4
}

fn default_true() -> bool {
    true
}

impl Default for MiqpExportConfig {
    fn default() -> Self {
        MiqpExportConfig {
            big_m: None,
            epsilon: default_epsilon(),
            l2_weight: 0.0,
            include_redundant: true,
        }
    }
}

impl MiqpExportConfig {
    /// Bound on `|lam_s{i}|` written to the model.
    pub fn price_bound(scenarios: &ScenarioSet) -> f64 {
        scenarios.iter().map(|s| s.lambda_da.abs()).fold(0.0, f64::max) + 1.0
    }

    pub fn resolved_big_m(&self, scenarios: &ScenarioSet) -> f64 {
        self.big_m.unwrap_or_else(|| 2.0 * Self::price_bound(scenarios))
    }

    pub fn validate(&self, scenarios: &ScenarioSet) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SolverError::InvalidOptions(format!(
                "epsilon {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return Err(SolverError::InvalidOptions("l2_weight must be finite and nonnegative".into()));
        }
        let max_da = Self::price_bound(scenarios) - 1.0;
        let m = self.resolved_big_m(scenarios);
        // Must exceed |lam - λDA| for every admissible offer price.
        let spread = Self::price_bound(scenarios) + max_da;
        if !(m.is_finite() && m > spread) {
            return Err(SolverError::InvalidOptions(format!(
                "big_m {m} must exceed the largest offer/price gap {spread}"
            )));
        }
        Ok(())
    }
}

/// Closed-form sizes of the exported model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MiqpStats {
    pub binaries: usize,
    pub constraints: usize,
    pub indicator: usize,
    pub mccormick: usize,
    pub scenario_rows: usize,
    pub rowsum: usize,
    pub price_order: usize,
    pub nesting: usize,
}

impl MiqpStats {
    pub fn expected(n_scenarios: usize, n_segments: usize, include_redundant: bool) -> Self {
        let (n, k) = (n_scenarios, n_segments);
        let indicator = 2 * n * k;
        let mccormick = 3 * n * k;
        let scenario_rows = 2 * n;
        let (rowsum, price_order, nesting) = if include_redundant {
            (n - 1, k - 1, n * (k - 1))
        } else {
            (0, 0, 0)
        };
        MiqpStats {
            binaries: n * k,
            constraints: indicator + mccormick + scenario_rows + 1 + rowsum + price_order + nesting,
            indicator,
            mccormick,
            scenario_rows,
            rowsum,
            price_order,
            nesting,
        }
    }
}

/// `c x` terms as LP text, e.g. `3 x - 2.5 y`.
fn linear(terms: &[(f64, String)]) -> String {
    let mut out = String::new();
    for (i, (c, v)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { "-" } else { "+" };
        if i == 0 {
            if *c < 0.0 {
                out.push_str("- ");
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        let _ = write!(out, "{} {v}", c.abs());
    }
    out
}

fn row(out: &mut impl Write, name: &str, terms: &[(f64, String)], sense: &str, rhs: f64) -> std::io::Result<()> {
    let terms: Vec<(f64, String)> = terms.iter().filter(|(c, _)| *c != 0.0).cloned().collect();
    let lhs = if terms.is_empty() { "0 alpha".to_string() } else { linear(&terms) };
    writeln!(out, " {name}: {lhs} {sense} {rhs}")
}

fn u(w: usize, i: usize) -> String {
    format!("u_w{w}_s{i}")
}
fn wv(w: usize, i: usize) -> String {
    format!("w_w{w}_s{i}")
}
fn p(i: usize) -> String {
    format!("p_s{i}")
}
fn lam(i: usize) -> String {
    format!("lam_s{i}")
}

/// Write the model to `out` and return its sizes.
pub fn write_miqp(
    scenarios: &ScenarioSet,
    opts: &SolveOptions,
    config: &MiqpExportConfig,
    out: &mut impl Write,
) -> Result<MiqpStats, SolverError> {
    opts.validate()?;
    config.validate(scenarios)?;
    let n = scenarios.len();
    let k = opts.n_segments;
    let m = config.resolved_big_m(scenarios);
    let eps = config.epsilon;
    let cap = opts.cap_rule.cap(scenarios);
    let tail = opts.risk.tail_weight(n);
    let bound = MiqpExportConfig::price_bound(scenarios);
    let mut stats = MiqpStats::expected(n, k, false);
    stats.constraints = 0;
    stats.indicator = 0;
    stats.mccormick = 0;
    stats.scenario_rows = 0;

    writeln!(out, "\\ offer curve MIQP: {n} scenarios, {k} segments, beta {}", opts.risk.beta())?;
    writeln!(out, "Maximize")?;
    let mut obj = vec![(1.0, "alpha".to_string())];
    obj.extend((0..n).map(|w| (-tail, format!("s_w{w}"))));
    write!(out, " obj: {}", linear(&obj))?;
    if config.l2_weight > 0.0 {
        let quad: Vec<String> = (0..k).map(|i| format!("{} {} ^ 2", 2.0 * config.l2_weight, p(i))).collect();
        write!(out, " - [ {} ] / 2", quad.join(" + "))?;
    }
    writeln!(out)?;
    writeln!(out, "Subject To")?;

    for (w, s) in scenarios.iter().enumerate() {
        // s_w >= alpha - (λDA Σ w + λRT d)
        let mut t = vec![(1.0, format!("s_w{w}")), (-1.0, "alpha".to_string())];
        t.extend((0..k).map(|i| (s.lambda_da, wv(w, i))));
        t.push((s.lambda_rt, format!("d_w{w}")));
        row(out, &format!("tail_w{w}"), &t, ">=", 0.0)?;
        let mut t = vec![(1.0, format!("d_w{w}"))];
        t.extend((0..k).map(|i| (1.0, wv(w, i))));
        row(out, &format!("short_w{w}"), &t, "<=", s.p_max_wind)?;
        stats.scenario_rows += 2;
    }

    for (w, s) in scenarios.iter().enumerate() {
        for i in 0..k {
            row(out, &format!("ind5_w{w}_s{i}"), &[(m, u(w, i)), (1.0, lam(i))], "<=", m + s.lambda_da)?;
            row(out, &format!("ind6_w{w}_s{i}"), &[(m, u(w, i)), (1.0, lam(i))], ">=", m * eps + s.lambda_da)?;
            stats.indicator += 2;
            row(out, &format!("mc1_w{w}_s{i}"), &[(1.0, wv(w, i)), (-1.0, p(i))], "<=", 0.0)?;
            row(out, &format!("mc2_w{w}_s{i}"), &[(1.0, wv(w, i)), (-cap, u(w, i))], "<=", 0.0)?;
            row(
                out,
                &format!("mc3_w{w}_s{i}"),
                &[(1.0, wv(w, i)), (-1.0, p(i)), (-cap, u(w, i))],
                ">=",
                -cap,
            )?;
            stats.mccormick += 3;
        }
    }

    let t: Vec<(f64, String)> = (0..k).map(|i| (1.0, p(i))).collect();
    row(out, "cap", &t, "<=", cap)?;

    if config.include_redundant {
        for w in 0..n.saturating_sub(1) {
            let mut t: Vec<(f64, String)> = (0..k).map(|i| (1.0, u(w, i))).collect();
            t.extend((0..k).map(|i| (-1.0, u(w + 1, i))));
            row(out, &format!("rowsum_w{w}"), &t, "<=", 0.0)?;
            stats.rowsum += 1;
        }
        for i in 0..k - 1 {
            row(out, &format!("order_s{i}"), &[(1.0, lam(i)), (-1.0, lam(i + 1))], "<=", 0.0)?;
            stats.price_order += 1;
        }
        for w in 0..n {
            for i in 0..k - 1 {
                row(out, &format!("nest_w{w}_s{i}"), &[(1.0, u(w, i + 1)), (-1.0, u(w, i))], "<=", 0.0)?;
                stats.nesting += 1;
            }
        }
    }
    stats.constraints = stats.indicator
        + stats.mccormick
        + stats.scenario_rows
        + 1
        + stats.rowsum
        + stats.price_order
        + stats.nesting;

    writeln!(out, "Bounds")?;
    for i in 0..k {
        writeln!(out, " {} <= {} <= {}", -bound, lam(i), bound)?;
        writeln!(out, " 0 <= {} <= {}", p(i), cap)?;
    }
    for w in 0..n {
        for i in 0..k {
            writeln!(out, " 0 <= {} <= {}", wv(w, i), cap)?;
        }
        writeln!(out, " -inf <= d_w{w} <= 0")?;
        writeln!(out, " s_w{w} >= 0")?;
    }
    writeln!(out, " alpha free")?;
    writeln!(out, "Binaries")?;
    for w in 0..n {
        let names: Vec<String> = (0..k).map(|i| u(w, i)).collect();
        writeln!(out, " {}", names.join(" "))?;
    }
    writeln!(out, "End")?;
    Ok(stats)
}

/// Write the model to `path`.
pub fn export_miqp(
    scenarios: &ScenarioSet,
    opts: &SolveOptions,
    config: &MiqpExportConfig,
    path: &Path,
) -> Result<MiqpStats, SolverError> {
    let mut out = BufWriter::new(File::create(path)?);
    let stats = write_miqp(scenarios, opts, config, &mut out)?;
    out.flush()?;
    Ok(stats)
}
