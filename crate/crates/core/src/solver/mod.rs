//! Offer-curve optimization under a CVaR objective.
//!
//! With scenarios sorted by day-ahead price, the set of scenarios in which a
//! segment clears is always a suffix of the list, and a higher-priced segment
//! clears in a sub-suffix of a lower-priced one. An offer curve is therefore
//! described by a nondecreasing [`BreakpointVector`] (where each segment
//! starts clearing) plus segment quantities. [`solve_exact`] searches
//! breakpoint vectors by branch and bound and solves the quantities of each
//! candidate with an exact linear program.

mod baseline;
mod bruteforce;
mod exact;
mod instance;
pub mod lp;
pub mod miqp;
mod parametric;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{postprocess, ClearingOutcome, MarketError, OfferCurve, Segment};
use crate::risk::{self, RiskError, RiskSpec};
use crate::scenario::ScenarioSet;

pub use baseline::percentile_strategy;
pub use bruteforce::{solve_bruteforce, BRUTEFORCE_LIMIT};
pub use exact::solve_exact;
pub use miqp::{export_miqp, write_miqp, MiqpExportConfig, MiqpStats};

/// Price increment above the highest day-ahead price given to segments that
/// never clear.
pub const NEVER_CLEAR_MARGIN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "{count} scenario(s) have negative day-ahead or real-time prices; the native solver \
         requires nonnegative prices. Clamp them (--clamp-negative-prices) or use the MIQP exporter"
    )]
    NegativePrices { count: usize },
    #[error("invalid solve options: {0}")]
    InvalidOptions(String),
    #[error("brute force would evaluate {evaluations} candidate curves, above the limit of {limit}")]
    TooLarge { evaluations: u128, limit: u128 },
    #[error("breakpoint vector {0:?} is not nondecreasing within 0..=|scenarios|")]
    BadBreakpoints(Vec<usize>),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// For each segment, the index of the lowest-price scenario in which it
/// clears; `len` (the scenario count) means the segment never clears.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BreakpointVector(Vec<usize>);

impl BreakpointVector {
    pub fn new(b: Vec<usize>, n_scenarios: usize) -> Result<Self, SolverError> {
        let ok = b.iter().all(|&x| x <= n_scenarios) && b.windows(2).all(|w| w[0] <= w[1]);
        if ok {
            Ok(BreakpointVector(b))
        } else {
            Err(SolverError::BadBreakpoints(b))
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Upper bound on the total offered quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum CapRule {
    /// The largest wind scenario.
    #[default]
    MaxScenarioWind,
    /// A fixed cap in MW.
    Fixed(f64),
}

impl CapRule {
    pub fn cap(self, scenarios: &ScenarioSet) -> f64 {
        match self {
            CapRule::MaxScenarioWind => scenarios.max_wind(),
            CapRule::Fixed(mw) => mw,
        }
    }
}

/// Search strategy of [`solve_exact`]. Both are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Dynamic program over cleared-quantity levels for a fixed VaR level,
    /// with branch and bound over that level. Scales to hundreds of
    /// scenarios.
    #[default]
    Levels,
    /// Branch and bound over breakpoint prefixes with an LP bound at every
    /// node. Practical up to a few dozen scenarios.
    Breakpoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub n_segments: usize,
    pub risk: RiskSpec,
    pub cap_rule: CapRule,
    /// Segments narrower than this are removed from the returned curve.
    pub min_segment_width_mw: f64,
    /// Wall-clock budget; when exhausted the best incumbent is returned
    /// without an optimality proof.
    pub time_budget: Option<Duration>,
    /// Worker threads; 0 uses every available core, 1 runs inline.
    pub threads: usize,
    /// Disable to enumerate every breakpoint vector.
    pub prune: bool,
    pub engine: Engine,
}

impl SolveOptions {
    pub fn new(n_segments: usize, risk: RiskSpec) -> Self {
        SolveOptions {
            n_segments,
            risk,
            cap_rule: CapRule::MaxScenarioWind,
            min_segment_width_mw: 0.0,
            time_budget: None,
            threads: 1,
            prune: true,
            engine: Engine::Levels,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_segments == 0 {
            return Err(SolverError::InvalidOptions("n_segments must be at least 1".into()));
        }
        if !(self.min_segment_width_mw >= 0.0 && self.min_segment_width_mw.is_finite()) {
            return Err(SolverError::InvalidOptions(
                "min_segment_width_mw must be finite and nonnegative".into(),
            ));
        }
        if let CapRule::Fixed(mw) = self.cap_rule {
            if !(mw >= 0.0 && mw.is_finite()) {
                return Err(SolverError::InvalidOptions("fixed cap must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Optimal curve after removing segments narrower than the configured
    /// minimum width.
    pub curve: OfferCurve,
    /// Breakpoints of the optimal curve before width filtering.
    pub breakpoints: BreakpointVector,
    /// CVaR of `per_scenario` day-ahead objective profits.
    pub objective: f64,
    /// Optimum before width filtering; equals `objective` when nothing was
    /// removed.
    pub unfiltered_objective: f64,
    pub beta: f64,
    pub per_scenario: Vec<ClearingOutcome>,
    pub tail_indices: Vec<usize>,
    pub nodes_explored: u64,
    /// True when the search completed, so `unfiltered_objective` is optimal.
    pub proof: bool,
}

/// JSON view of a [`SolveReport`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportSummary {
    pub objective: f64,
    pub beta: f64,
    pub segments: Vec<Segment>,
    pub tail_indices: Vec<usize>,
    pub nodes_explored: u64,
    pub proof: bool,
}

impl SolveReport {
    /// Evaluate `curve` on every scenario and assemble a report.
    pub fn from_curve(
        scenarios: &ScenarioSet,
        raw_curve: &OfferCurve,
        breakpoints: BreakpointVector,
        opts: &SolveOptions,
        nodes_explored: u64,
        proof: bool,
    ) -> Result<Self, SolverError> {
        let unfiltered_objective = evaluate_curve(scenarios, raw_curve, opts.risk)?;
        let curve = postprocess(raw_curve, opts.min_segment_width_mw);
        let per_scenario: Vec<ClearingOutcome> = scenarios
            .iter()
            .map(|s| ClearingOutcome::evaluate(&curve, s))
            .collect();
        let profits: Vec<f64> = per_scenario.iter().map(|o| o.da_objective_profit).collect();
        let objective = risk::cvar(&profits, opts.risk)?;
        let tail_indices = risk::active_samples(&profits, opts.risk)?;
        Ok(SolveReport {
            curve,
            breakpoints,
            objective,
            unfiltered_objective,
            beta: opts.risk.beta(),
            per_scenario,
            tail_indices,
            nodes_explored,
            proof,
        })
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            objective: self.objective,
            beta: self.beta,
            segments: self.curve.segments().to_vec(),
            tail_indices: self.tail_indices.clone(),
            nodes_explored: self.nodes_explored,
            proof: self.proof,
        }
    }

    pub fn total_offered(&self) -> f64 {
        self.curve.total_quantity()
    }
}

/// CVaR of the day-ahead objective profits of `curve`.
pub fn evaluate_curve(scenarios: &ScenarioSet, curve: &OfferCurve, spec: RiskSpec) -> Result<f64, SolverError> {
    let profits: Vec<f64> = scenarios
        .iter()
        .map(|s| ClearingOutcome::evaluate(curve, s).da_objective_profit)
        .collect();
    Ok(risk::cvar(&profits, spec)?)
}

pub(crate) fn check_prices(scenarios: &ScenarioSet) -> Result<(), SolverError> {
    let count = scenarios
        .iter()
        .filter(|s| s.lambda_da < 0.0 || s.lambda_rt < 0.0)
        .count();
    if count > 0 {
        return Err(SolverError::NegativePrices { count });
    }
    Ok(())
}
