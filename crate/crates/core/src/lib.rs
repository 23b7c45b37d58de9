//! Risk-aware day-ahead offer curves for a price-taking wind generator.
//!
//! Scenario generation and ingestion live in [`scenario`], the CVaR measure
//! in [`risk`], market clearing and settlement in [`market`], curve
//! optimization in [`solver`] and rolling historical evaluation in
//! [`backtest`].

pub mod backtest;
pub mod market;
pub mod risk;
pub mod scenario;
pub mod solver;

pub use backtest::{BacktestError, BacktestRecord, RegretSummary};
pub use market::{Clearing, ClearingOutcome, MarketError, OfferCurve, Segment};
pub use risk::{RiskError, RiskSpec};
pub use scenario::{GaussianSpec, Scenario, ScenarioError, ScenarioSet};
pub use solver::{
    evaluate_curve, export_miqp, percentile_strategy, solve_bruteforce, solve_exact, BreakpointVector, CapRule, Engine,
    MiqpExportConfig, MiqpStats, ReportSummary, SolveOptions, SolveReport, SolverError,
};
