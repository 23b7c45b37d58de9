//! Exact search parametrized by the VaR level.
//!
//! CVaR is `max_α α − t Σ (α − x_ω)⁺` with `t = 1 / tail mass`. Writing the
//! cleared quantity of each price group as a nondecreasing level `L_g` with at
//! most N upward jumps, the problem for a fixed α is separable over groups
//! and solved exactly by dynamic programming on a finite set of candidate
//! levels (0, the cap, every wind value and every root of `f_ω(L) = α`).
//!
//! The outer maximization over α is a branch and bound on intervals. For
//! `α ∈ [lo, hi]` and any fixed curve, concavity in α gives
//! `g(α) ≤ g(lo) + (α − lo)(1 − t·#{x_ω < lo})`, so
//! `max(lo + D(lo), lo + D'(lo) + (hi − lo))` bounds the interval, where `D`
//! is the fixed-α optimum and `D'` adds a penalty of `t (hi − lo)` per
//! scenario below `lo`. Every DP solution is also a feasible curve; the best
//! breakpoints found are re-optimized by the quantity LP.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rayon::prelude::*;

use crate::scenario::Scenario;

use super::instance::Instance;
use super::SolverError;

/// Intervals split per round; fixed so node counts ignore the thread count.
const BATCH: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Mode {
    /// Maximize the sample mean (β = 0).
    Mean,
    /// `−t [(α − f)⁺ + δ·1(f < α)]` per scenario.
    Tail { alpha: f64, delta: f64 },
}

fn profit(s: &Scenario, level: f64) -> f64 {
    s.lambda_da * level + s.lambda_rt * (s.p_max_wind - level).min(0.0)
}

#[derive(Debug, Clone)]
pub(crate) struct DpSolution {
    /// Optimal sum of per-scenario terms (α not included).
    pub value: f64,
    pub active: Vec<usize>,
    /// Segment quantities for `active`.
    pub q: Vec<f64>,
}

pub(crate) struct LevelDp<'i, 'a> {
    inst: &'i Instance<'a>,
    base_levels: Vec<f64>,
    scale: f64,
}

impl<'i, 'a> LevelDp<'i, 'a> {
    pub fn new(inst: &'i Instance<'a>) -> Self {
        let cap = inst.cap;
        let mut base_levels = vec![0.0, cap];
        base_levels.extend(inst.scenarios.iter().map(|s| s.p_max_wind.min(cap)));
        let scale = inst
            .scenarios
            .iter()
            .map(|s| (s.lambda_da.abs() + s.lambda_rt.abs()) * (s.p_max_wind + cap))
            .fold(1.0, f64::max);
        LevelDp {
            inst,
            base_levels,
            scale,
        }
    }

    fn levels(&self, mode: Mode) -> Vec<f64> {
        let cap = self.inst.cap;
        let mut levels = self.base_levels.clone();
        if let Mode::Tail { alpha, .. } = mode {
            for s in self.inst.scenarios.iter() {
                let w = s.p_max_wind;
                if s.lambda_da > 0.0 {
                    let r = alpha / s.lambda_da;
                    if (0.0..=w.min(cap)).contains(&r) {
                        levels.push(r);
                    }
                }
                let slope = s.lambda_da - s.lambda_rt;
                if slope != 0.0 {
                    let r = (alpha - s.lambda_rt * w) / slope;
                    if r >= w && r <= cap {
                        levels.push(r);
                    }
                }
            }
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    fn run(&self, mode: Mode) -> DpSolution {
        let inst = self.inst;
        let levels = self.levels(mode);
        let nl = levels.len();
        let k = inst.effective_segments();
        let groups = inst.n_groups();
        let n = inst.scenarios.len();
        let t = inst.tail_weight;
        let slack = 1e-12 * self.scale;
        let term = |s: &Scenario, level: f64| -> f64 {
            let f = profit(s, level);
            match mode {
                Mode::Mean => f / n as f64,
                Mode::Tail { alpha, delta } => {
                    let short = (alpha - f).max(0.0);
                    let below = if f < alpha - slack { delta } else { 0.0 };
                    -t * (short + below)
                }
            }
        };

        let idx = |j: usize, c: usize| j * nl + c;
        let mut prev = vec![f64::NEG_INFINITY; (k + 1) * nl];
        prev[idx(0, 0)] = 0.0;
        let mut cur = vec![0.0; (k + 1) * nl];
        // back[g][j][c]: u32::MAX when the level was kept, else the level it
        // jumped from.
        let mut back = vec![u32::MAX; groups * (k + 1) * nl];
        let mut val = vec![0.0; nl];
        let bounds: Vec<usize> = inst
            .groups
            .iter()
            .map(|g| g.start)
            .chain(std::iter::once(n))
            .collect();

        for g in 0..groups {
            val.iter_mut().for_each(|v| *v = 0.0);
            for s in &inst.scenarios.as_slice()[bounds[g]..bounds[g + 1]] {
                for (v, &level) in val.iter_mut().zip(&levels) {
                    *v += term(s, level);
                }
            }
            let back_g = &mut back[g * (k + 1) * nl..(g + 1) * (k + 1) * nl];
            for j in 0..=k {
                let mut run_best = f64::NEG_INFINITY;
                let mut run_arg = 0usize;
                for c in 0..nl {
                    let stay = prev[idx(j, c)];
                    let (best, code) = if j > 0 && run_best > stay {
                        (run_best, run_arg as u32)
                    } else {
                        (stay, u32::MAX)
                    };
                    cur[idx(j, c)] = best + val[c];
                    back_g[idx(j, c)] = code;
                    if j > 0 && prev[idx(j - 1, c)] > run_best {
                        run_best = prev[idx(j - 1, c)];
                        run_arg = c;
                    }
                }
            }
            std::mem::swap(&mut prev, &mut cur);
        }

        let (mut j, mut c) = (0, 0);
        let mut value = f64::NEG_INFINITY;
        for jj in 0..=k {
            for cc in 0..nl {
                if prev[idx(jj, cc)] > value {
                    value = prev[idx(jj, cc)];
                    (j, c) = (jj, cc);
                }
            }
        }

        let mut active = Vec::with_capacity(j);
        let mut cum = Vec::with_capacity(j);
        for g in (0..groups).rev() {
            let code = back[g * (k + 1) * nl + idx(j, c)];
            if code != u32::MAX {
                active.push(g);
                cum.push(levels[c]);
                j -= 1;
                c = code as usize;
            }
        }
        active.reverse();
        cum.reverse();
        let mut q = Vec::with_capacity(cum.len());
        let mut below = 0.0;
        for level in cum {
            q.push(level - below);
            below = level;
        }
        DpSolution { value, active, q }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Best {
    pub value: f64,
    pub active: Vec<usize>,
    pub q: Vec<f64>,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        self.value > other.value || (self.value == other.value && self.active < other.active)
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
    /// `D(lo)`, reused by the left child.
    d_lo: f64,
    bound: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

pub(crate) struct Outcome {
    pub best: Best,
    pub nodes: u64,
    pub proof: bool,
}

struct Search<'i, 'a> {
    inst: &'i Instance<'a>,
    dp: LevelDp<'i, 'a>,
    best: Option<Best>,
    polished: HashMap<Vec<usize>, f64>,
}

impl Search<'_, '_> {
    fn offer(&mut self, sol: &DpSolution) -> Result<(), SolverError> {
        let (curve, _) = self.inst.curve(&sol.active, &sol.q);
        let value = super::evaluate_curve(self.inst.scenarios, &curve, self.inst.risk)?;
        let cand = Best {
            value,
            active: sol.active.clone(),
            q: sol.q.clone(),
        };
        let improves = self.best.as_ref().is_none_or(|b| cand.beats(b));
        if improves {
            self.best = Some(cand);
            self.polish()?;
        }
        Ok(())
    }

    /// Re-optimize the incumbent's quantities for its breakpoints.
    fn polish(&mut self) -> Result<(), SolverError> {
        let Some(best) = self.best.as_ref() else { return Ok(()) };
        if self.polished.contains_key(&best.active) {
            return Ok(());
        }
        let sol = self.inst.solve_quantities(&best.active)?;
        let (curve, _) = self.inst.curve(&best.active, &sol.q);
        let value = super::evaluate_curve(self.inst.scenarios, &curve, self.inst.risk)?;
        self.polished.insert(best.active.clone(), value);
        if value > best.value {
            let active = best.active.clone();
            self.best = Some(Best { value, active, q: sol.q });
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        let v = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
        v + 1e-9 * v.abs().max(1.0)
    }
}

/// Range containing the VaR of every feasible curve.
fn alpha_range(inst: &Instance<'_>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in inst.scenarios.iter() {
        for level in [0.0, s.p_max_wind.min(inst.cap), inst.cap] {
            let f = profit(s, level);
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    (lo, hi)
}

pub(crate) fn search(
    inst: &Instance<'_>,
    deadline: Option<Instant>,
    parallel: bool,
) -> Result<Outcome, SolverError> {
    let mut st = Search {
        inst,
        dp: LevelDp::new(inst),
        best: None,
        polished: HashMap::new(),
    };
    let n = inst.scenarios.len();
    if (inst.risk.tail_mass(n) - n as f64).abs() < 1e-12 {
        let sol = st.dp.run(Mode::Mean);
        st.offer(&sol)?;
        let best = st.best.expect("offer always sets an incumbent");
        return Ok(Outcome {
            best,
            nodes: 1,
            proof: true,
        });
    }

    let (lo, hi) = alpha_range(inst);
    let tail = |alpha: f64, delta: f64| Mode::Tail { alpha, delta };
    let root_plain = st.dp.run(tail(lo, 0.0));
    let root_pen = st.dp.run(tail(lo, hi - lo));
    st.offer(&root_plain)?;
    let mut heap = BinaryHeap::new();
    heap.push(Interval {
        lo,
        hi,
        d_lo: root_plain.value,
        bound: lo + root_plain.value.max(root_pen.value + (hi - lo)),
    });
    let mut nodes = 1u64;
    let width_floor = 1e-12 * (hi - lo).abs().max(lo.abs()).max(hi.abs()).max(1.0);
    let mut proof = true;

    loop {
        let threshold = st.threshold();
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            match heap.pop() {
                Some(iv) if iv.bound > threshold => {
                    if iv.hi - iv.lo > width_floor {
                        batch.push(iv);
                    }
                }
                _ => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            proof = false;
            break;
        }

        // Per split: the left child's penalized DP, and both DPs at the
        // midpoint for the right child.
        let mut jobs = Vec::with_capacity(3 * batch.len());
        for iv in &batch {
            let mid = 0.5 * (iv.lo + iv.hi);
            let half = mid - iv.lo;
            jobs.push(tail(iv.lo, half));
            jobs.push(tail(mid, 0.0));
            jobs.push(tail(mid, iv.hi - mid));
        }
        let results: Vec<DpSolution> = if parallel {
            jobs.par_iter().map(|&m| st.dp.run(m)).collect()
        } else {
            jobs.iter().map(|&m| st.dp.run(m)).collect()
        };
        nodes += 2 * batch.len() as u64;

        for (iv, r) in batch.iter().zip(results.chunks(3)) {
            st.offer(&r[1])?;
            let mid = 0.5 * (iv.lo + iv.hi);
            let left = Interval {
                lo: iv.lo,
                hi: mid,
                d_lo: iv.d_lo,
                bound: iv.lo + iv.d_lo.max(r[0].value + (mid - iv.lo)),
            };
            let right = Interval {
                lo: mid,
                hi: iv.hi,
                d_lo: r[1].value,
                bound: mid + r[1].value.max(r[2].value + (iv.hi - mid)),
            };
            heap.push(left);
            heap.push(right);
        }
    }

    st.polish()?;
    let best = st.best.expect("root DP always yields an incumbent");
    Ok(Outcome { best, nodes, proof })
}
