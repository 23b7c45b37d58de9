//! Exhaustive oracle over breakpoints and a quantity grid.
//!
//! Independent of the branch-and-bound path: breakpoints range over raw
//! scenario indices (ties are not collapsed), segment prices are taken from
//! the breakpoint scenario, clearing goes through [`crate::market::clear`],
//! and quantities are enumerated on `{0, step, 2 step, ...}` with total at
//! most the cap. Rounding an optimal solution down to the grid loses at most
//! `max λDA · N · step`, which bounds the oracle's gap.

use crate::market::{clear, OfferCurve, Segment};
use crate::risk;
use crate::scenario::ScenarioSet;

use super::{check_prices, BreakpointVector, SolveOptions, SolveReport, SolverError, NEVER_CLEAR_MARGIN};

/// Maximum number of (curve, scenario) evaluations the oracle accepts.
pub const BRUTEFORCE_LIMIT: u128 = 2_000_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn next_nondecreasing(b: &mut [usize], max: usize) -> bool {
    // Advance to the next nondecreasing vector over 0..=max in lex order.
    for i in (0..b.len()).rev() {
        if b[i] < max {
            b[i] += 1;
            let v = b[i];
            b[i + 1..].fill(v);
            return true;
        }
    }
    false
}

fn for_each_grid<F: FnMut(&[u64])>(levels: &mut Vec<u64>, n: usize, budget: u64, f: &mut F) {
    if levels.len() == n {
        f(levels);
        return;
    }
    for v in 0..=budget {
        levels.push(v);
        for_each_grid(levels, n, budget - v, f);
        levels.pop();
    }
}

struct Best {
    value: f64,
    b: Vec<usize>,
    q: Vec<f64>,
}

pub fn solve_bruteforce(
    scenarios: &ScenarioSet,
    opts: &SolveOptions,
    quantity_step: f64,
) -> Result<SolveReport, SolverError> {
    opts.validate()?;
    check_prices(scenarios)?;
    let cap = opts.cap_rule.cap(scenarios);
    if !(quantity_step > 0.0 && quantity_step.is_finite()) {
        return Err(SolverError::InvalidOptions("quantity_step must be positive".into()));
    }
    let n = scenarios.len();
    let segs = opts.n_segments;
    let steps = ((cap / quantity_step) + 1e-9).floor() as u64;

    let breakpoint_count = binomial((n + segs) as u128, segs as u128);
    let grid_count = binomial(steps as u128 + segs as u128, segs as u128);
    let evaluations = breakpoint_count.saturating_mul(grid_count).saturating_mul(n as u128);
    if evaluations > BRUTEFORCE_LIMIT {
        return Err(SolverError::TooLarge {
            evaluations,
            limit: BRUTEFORCE_LIMIT,
        });
    }

    let never = scenarios.max_lambda_da() + NEVER_CLEAR_MARGIN;
    let mut best: Option<Best> = None;
    let mut b = vec![0usize; segs];
    let mut profits = vec![0.0; n];
    let mut sorted = vec![0.0; n];
    loop {
        let prices: Vec<f64> = b
            .iter()
            .map(|&i| if i < n { scenarios.as_slice()[i].lambda_da } else { never })
            .collect();
        // Segment counts cleared per scenario, via the market rule.
        let probe = OfferCurve::new(prices.iter().map(|&price| Segment { price, quantity: 0.0 }).collect())?;
        let counts: Vec<usize> = scenarios
            .iter()
            .map(|s| clear(&probe, s.lambda_da).cleared_segments())
            .collect();

        let mut levels = Vec::with_capacity(segs);
        for_each_grid(&mut levels, segs, steps, &mut |grid: &[u64]| {
            let q: Vec<f64> = grid.iter().map(|&g| g as f64 * quantity_step).collect();
            let mut cumulative = vec![0.0; segs + 1];
            for i in 0..segs {
                cumulative[i + 1] = cumulative[i] + q[i];
            }
            for (w, s) in scenarios.iter().enumerate() {
                let cleared = cumulative[counts[w]];
                profits[w] = s.lambda_da * cleared + s.lambda_rt * (s.p_max_wind - cleared).min(0.0);
            }
            sorted.copy_from_slice(&profits);
            sorted.sort_by(f64::total_cmp);
            let value = risk::cvar_sorted(&sorted, opts.risk);
            let better = match &best {
                None => true,
                Some(cur) => value > cur.value,
            };
            if better {
                best = Some(Best {
                    value,
                    b: b.clone(),
                    q,
                });
            }
        });

        if !next_nondecreasing(&mut b, n) {
            break;
        }
    }

    let best = best.expect("grid always contains the zero vector");
    let segments = best
        .b
        .iter()
        .zip(&best.q)
        .map(|(&i, &quantity)| Segment {
            price: if i < n { scenarios.as_slice()[i].lambda_da } else { never },
            quantity,
        })
        .collect();
    let curve = OfferCurve::new(segments)?;
    let breakpoints = BreakpointVector::new(best.b, n)?;
    let nodes = breakpoint_count.min(u64::MAX as u128) as u64;
    SolveReport::from_curve(scenarios, &curve, breakpoints, opts, nodes, true)
}
