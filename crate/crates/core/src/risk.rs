//! Sample-average value at risk and conditional value at risk of profits.
//!
//! Profits are equally weighted. With risk factor `beta` the tail holds the
//! worst `(1 - beta)` probability mass; when `(1 - beta) * n` is not an
//! integer the marginal scenario enters the tail fractionally, so that the
//! sorted-tail value equals the optimum of the epigraph form
//! `max_a  a - 1 / ((1 - beta) n) * sum(max(0, a - profit))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("profit list is empty")]
    Empty,
    #[error("risk factor beta = {0} must lie in [0, 1)")]
    BadBeta(f64),
    #[error("profit {index} is not finite")]
    NotFinite { index: usize },
}

/// CVaR risk-aversion factor `beta` in `[0, 1)`; 0 is the plain expectation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RiskSpec {
    beta: f64,
}

impl RiskSpec {
    pub fn new(beta: f64) -> Result<Self, RiskError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(RiskError::BadBeta(beta));
        }
        Ok(RiskSpec { beta })
    }

    pub fn neutral() -> Self {
        RiskSpec { beta: 0.0 }
    }

    pub fn beta(self) -> f64 {
        self.beta
    }

    /// Tail size in scenarios, `(1 - beta) * n`. Values within rounding
    /// noise of an integer are snapped to it.
    pub fn tail_mass(self, n: usize) -> f64 {
        let m = (1.0 - self.beta) * n as f64;
        let r = m.round();
        if (m - r).abs() <= 1e-9 * (n as f64).max(1.0) && r >= 1.0 {
            r
        } else {
            m
        }
    }

    /// Weight `1 / ((1 - beta) n)` applied to each tail shortfall in the
    /// epigraph form.
    pub fn tail_weight(self, n: usize) -> f64 {
        1.0 / self.tail_mass(n)
    }
}

impl TryFrom<f64> for RiskSpec {
    type Error = RiskError;

    fn try_from(beta: f64) -> Result<Self, Self::Error> {
        RiskSpec::new(beta)
    }
}

impl From<RiskSpec> for f64 {
    fn from(spec: RiskSpec) -> f64 {
        spec.beta
    }
}

fn sorted(profits: &[f64]) -> Result<Vec<f64>, RiskError> {
    if profits.is_empty() {
        return Err(RiskError::Empty);
    }
    if let Some(index) = profits.iter().position(|p| !p.is_finite()) {
        return Err(RiskError::NotFinite { index });
    }
    let mut v = profits.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Mean of the worst `(1 - beta)` probability mass of `profits`.
pub fn cvar(profits: &[f64], spec: RiskSpec) -> Result<f64, RiskError> {
    let v = sorted(profits)?;
    Ok(cvar_sorted(&v, spec))
}

/// [`cvar`] on an already ascending, finite, nonempty slice.
pub fn cvar_sorted(sorted: &[f64], spec: RiskSpec) -> f64 {
    let m = spec.tail_mass(sorted.len());
    let whole = m.floor() as usize;
    let mut sum: f64 = sorted[..whole.min(sorted.len())].iter().sum();
    let frac = m - whole as f64;
    if frac > 0.0 && whole < sorted.len() {
        sum += frac * sorted[whole];
    }
    sum / m
}

/// Smallest profit `v` such that the mass of `{profit <= v}` is at least
/// `1 - beta`.
pub fn var(profits: &[f64], spec: RiskSpec) -> Result<f64, RiskError> {
    let v = sorted(profits)?;
    Ok(var_sorted(&v, spec))
}

pub fn var_sorted(sorted: &[f64], spec: RiskSpec) -> f64 {
    let m = spec.tail_mass(sorted.len());
    let k = (m.ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Indices of the tail scenarios, those with profit at or below the VaR.
/// Every scenario tied with the VaR is included.
pub fn active_samples(profits: &[f64], spec: RiskSpec) -> Result<Vec<usize>, RiskError> {
    let threshold = var(profits, spec)?;
    Ok(profits
        .iter()
        .enumerate()
        .filter(|(_, p)| **p <= threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Epigraph objective `a - w * sum(max(0, a - profit))` at a given `a`.
pub fn epigraph_objective(profits: &[f64], spec: RiskSpec, alpha: f64) -> f64 {
    let w = spec.tail_weight(profits.len());
    alpha - w * profits.iter().map(|p| (alpha - p).max(0.0)).sum::<f64>()
}
