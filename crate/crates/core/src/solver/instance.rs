//! Price groups and the quantity subproblem for a fixed set of breakpoints.

use crate::market::{OfferCurve, Segment};
use crate::risk::RiskSpec;
use crate::scenario::ScenarioSet;

use super::lp::{DenseLp, LpError};
use super::{BreakpointVector, SolveOptions, NEVER_CLEAR_MARGIN};

/// A run of scenarios sharing one day-ahead price. A segment priced at the
/// group price clears in this group and every later one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Group {
    pub start: usize,
    pub price: f64,
}

#[derive(Debug)]
pub(crate) struct Instance<'a> {
    pub scenarios: &'a ScenarioSet,
    pub groups: Vec<Group>,
    pub group_of: Vec<usize>,
    pub cap: f64,
    pub risk: RiskSpec,
    pub tail_weight: f64,
    pub n_segments: usize,
}

/// Optimal quantities for a set of active groups.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Quantities {
    pub value: f64,
    pub q: Vec<f64>,
}

impl<'a> Instance<'a> {
    pub fn new(scenarios: &'a ScenarioSet, opts: &SolveOptions) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        let mut group_of = Vec::with_capacity(scenarios.len());
        for (i, s) in scenarios.iter().enumerate() {
            match groups.last() {
                Some(g) if g.price == s.lambda_da => {}
                _ => groups.push(Group {
                    start: i,
                    price: s.lambda_da,
                }),
            }
            group_of.push(groups.len() - 1);
        }
        Instance {
            scenarios,
            groups,
            group_of,
            cap: opts.cap_rule.cap(scenarios),
            risk: opts.risk,
            tail_weight: opts.risk.tail_weight(scenarios.len()),
            n_segments: opts.n_segments,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Segments that can be given distinct clearing groups.
    pub fn effective_segments(&self) -> usize {
        self.n_segments.min(self.groups.len())
    }

    /// Maximize the CVaR of day-ahead objective profits over quantities of
    /// segments clearing from each group in `active` (ascending).
    ///
    /// Variables are `q`, `alpha = a⁺ - a⁻` and one tail excess `s` per
    /// scenario. With nonnegative real-time prices the shortfall term is the
    /// lower envelope of two linear pieces, giving two rows per scenario:
    ///
    /// ```text
    /// a - s - λDA·P ≤ 0
    /// a - s - (λDA - λRT)·P ≤ λRT·pmax      (only when P can be positive)
    /// Σ q ≤ cap
    /// ```
    pub fn solve_quantities(&self, active: &[usize]) -> Result<Quantities, LpError> {
        let k = active.len();
        let n = self.scenarios.len();
        let (a_pos, a_neg) = (k, k + 1);
        let s0 = k + 2;
        let mut objective = vec![0.0; k + 2 + n];
        objective[a_pos] = 1.0;
        objective[a_neg] = -1.0;
        for v in &mut objective[s0..] {
            *v = -self.tail_weight;
        }
        let mut lp = DenseLp::new(objective);
        let mut entries = Vec::with_capacity(k + 3);
        for (w, s) in self.scenarios.iter().enumerate() {
            let g = self.group_of[w];
            let cleared = active.partition_point(|&a| a <= g);
            entries.clear();
            entries.extend([(a_pos, 1.0), (a_neg, -1.0), (s0 + w, -1.0)]);
            entries.extend((0..cleared).map(|j| (j, -s.lambda_da)));
            lp.push_sparse_row(&entries, 0.0)?;
            if cleared > 0 {
                entries.truncate(3);
                entries.extend((0..cleared).map(|j| (j, s.lambda_rt - s.lambda_da)));
                lp.push_sparse_row(&entries, s.lambda_rt * s.p_max_wind)?;
            }
        }
        let cap_row: Vec<(usize, f64)> = (0..k).map(|j| (j, 1.0)).collect();
        lp.push_sparse_row(&cap_row, self.cap)?;
        let sol = lp.solve()?;
        let mut q: Vec<f64> = sol.x[..k].iter().map(|v| v.max(0.0)).collect();
        let total: f64 = q.iter().sum();
        if total > self.cap && total > 0.0 {
            let scale = self.cap / total;
            q.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(Quantities { value: sol.objective, q })
    }

    /// Offer curve and breakpoint vector for quantities on active groups,
    /// padded with never-clearing empty segments up to `n_segments`.
    pub fn curve(&self, active: &[usize], q: &[f64]) -> (OfferCurve, BreakpointVector) {
        let n = self.scenarios.len();
        let never = self.scenarios.max_lambda_da() + NEVER_CLEAR_MARGIN;
        let mut segments: Vec<Segment> = active
            .iter()
            .zip(q)
            .map(|(&g, &quantity)| Segment {
                price: self.groups[g].price,
                quantity,
            })
            .collect();
        let mut b: Vec<usize> = active.iter().map(|&g| self.groups[g].start).collect();
        while segments.len() < self.n_segments {
            segments.push(Segment {
                price: never,
                quantity: 0.0,
            });
            b.push(n);
        }
        let curve = OfferCurve::new(segments).expect("group prices ascend and quantities are nonnegative");
        let b = BreakpointVector::new(b, n).expect("group starts ascend");
        (curve, b)
    }
}
