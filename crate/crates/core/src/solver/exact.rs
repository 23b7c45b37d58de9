//! Entry point of the exact solver, and branch and bound over breakpoint
//! vectors ([`Engine::Breakpoints`]).
//!
//! Search nodes are strictly increasing prefixes of price-group indices. Two
//! segments sharing a group behave like one segment carrying the summed
//! quantity, so only distinct groups are enumerated and leaves hold
//! `min(N, groups)` of them; any remaining segments are padded as empty
//! never-clearing blocks.
//!
//! A node's bound is the quantity LP over the prefix plus every group above
//! its last element. Each completion uses a subset of those groups (the rest
//! at zero quantity), so the bound dominates every leaf below the node.
//!
//! Parallelism is deterministic: first-level subtrees are processed in fixed
//! chunks, and every subtree in a chunk prunes against the incumbent from the
//! start of the chunk plus its own local incumbent. Node counts, the chosen
//! argmax and all outputs are therefore independent of the thread count.

use std::time::Instant;

use rayon::prelude::*;

use crate::scenario::ScenarioSet;

use super::instance::{Instance, Quantities};
use super::parametric;
use super::{check_prices, Engine, SolveOptions, SolveReport, SolverError};

/// First-level subtrees explored between incumbent merges.
const CHUNK: usize = 16;

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    active: Vec<usize>,
    q: Vec<f64>,
}

impl Candidate {
    /// Higher objective wins; equal objectives go to the lexicographically
    /// smaller breakpoint vector.
    fn beats(&self, other: &Candidate) -> bool {
        self.value > other.value || (self.value == other.value && self.active < other.active)
    }
}

fn keep_best(slot: &mut Option<Candidate>, c: Candidate) {
    match slot {
        Some(best) if !c.beats(best) => {}
        _ => *slot = Some(c),
    }
}

fn prune_tolerance(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}

struct Subtree<'i, 'a> {
    inst: &'i Instance<'a>,
    prune: bool,
    floor: f64,
    deadline: Option<Instant>,
    best: Option<Candidate>,
    nodes: u64,
    aborted: bool,
}

impl Subtree<'_, '_> {
    fn threshold(&self) -> f64 {
        let local = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
        let t = self.floor.max(local);
        t - prune_tolerance(t)
    }

    fn out_of_time(&mut self) -> bool {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.aborted = true;
            }
        }
        self.aborted
    }

    fn leaf(&mut self, active: Vec<usize>, sol: Quantities) {
        let (curve, _) = self.inst.curve(&active, &sol.q);
        let value = super::evaluate_curve(self.inst.scenarios, &curve, self.inst.risk)
            .expect("curve evaluation on a valid instance");
        keep_best(&mut self.best, Candidate { value, active, q: sol.q });
    }

    /// Expand `prefix`, whose bound has already been counted and passed.
    /// `prefix_bound` is the LP over `prefix` plus all groups above it.
    fn expand(&mut self, prefix: &mut Vec<usize>, prefix_bound: &Quantities) -> Result<(), SolverError> {
        let k_total = self.inst.n_groups();
        let target = self.inst.effective_segments();
        let remaining = target - prefix.len();
        let first = prefix.last().map_or(0, |&g| g + 1);
        let last = k_total - remaining;
        let child_is_leaf = remaining == 1;

        let mut children: Vec<(usize, Quantities)> = Vec::with_capacity(last + 1 - first);
        for g in first..=last {
            if self.out_of_time() {
                return Ok(());
            }
            self.nodes += 1;
            prefix.push(g);
            let sol = if child_is_leaf {
                self.inst.solve_quantities(prefix)?
            } else if g == first {
                // Same active set as the parent's relaxation.
                prefix_bound.clone()
            } else {
                let relaxed: Vec<usize> = prefix.iter().copied().chain(g + 1..k_total).collect();
                self.inst.solve_quantities(&relaxed)?
            };
            if child_is_leaf {
                self.leaf(prefix.clone(), sol);
            } else {
                children.push((g, sol));
            }
            prefix.pop();
        }

        children.sort_by(|a, b| b.1.value.total_cmp(&a.1.value).then(a.0.cmp(&b.0)));
        for (g, bound) in children {
            if self.prune && bound.value < self.threshold() {
                continue;
            }
            if self.out_of_time() {
                return Ok(());
            }
            prefix.push(g);
            self.expand(prefix, &bound)?;
            prefix.pop();
        }
        Ok(())
    }
}

/// Globally optimal offer curve for the scenario set.
///
/// Requires nonnegative day-ahead and real-time prices. With pruning
/// disabled every breakpoint vector is enumerated regardless of `engine`.
pub fn solve_exact(scenarios: &ScenarioSet, opts: &SolveOptions) -> Result<SolveReport, SolverError> {
    opts.validate()?;
    check_prices(scenarios)?;
    let inst = Instance::new(scenarios, opts);
    let deadline = opts.time_budget.map(|b| Instant::now() + b);
    let target = inst.effective_segments();
    let k_total = inst.n_groups();

    let pool = if opts.threads == 1 {
        None
    } else {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| SolverError::InvalidOptions(format!("thread pool: {e}")))?,
        )
    };
    let parallel = pool.is_some();
    let run = |f: &(dyn Fn() -> Result<Outcome, SolverError> + Sync)| match &pool {
        Some(p) => p.install(f),
        None => f(),
    };

    let outcome = run(&|| match opts.engine {
        Engine::Levels if opts.prune => {
            let out = parametric::search(&inst, deadline, parallel)?;
            Ok(Outcome {
                best: Some(Candidate {
                    value: out.best.value,
                    active: out.best.active,
                    q: out.best.q,
                }),
                nodes: out.nodes,
                aborted: !out.proof,
            })
        }
        _ => search(&inst, opts, deadline, target, k_total, parallel),
    })?;

    // Only reachable when the time budget ran out before the first leaf.
    let best = outcome.best.unwrap_or_else(|| Candidate {
        value: f64::NEG_INFINITY,
        active: (0..target).collect(),
        q: vec![0.0; target],
    });
    let (curve, breakpoints) = inst.curve(&best.active, &best.q);
    SolveReport::from_curve(scenarios, &curve, breakpoints, opts, outcome.nodes, !outcome.aborted)
}

struct Outcome {
    best: Option<Candidate>,
    nodes: u64,
    aborted: bool,
}

fn search(
    inst: &Instance<'_>,
    opts: &SolveOptions,
    deadline: Option<Instant>,
    target: usize,
    k_total: usize,
    parallel: bool,
) -> Result<Outcome, SolverError> {
    let first_level: Vec<usize> = (0..=k_total - target).collect();
    let solve_first = |&g: &usize| -> Result<(usize, Quantities), SolverError> {
        let active: Vec<usize> = if target == 1 { vec![g] } else { (g..k_total).collect() };
        Ok((g, inst.solve_quantities(&active)?))
    };
    let mut roots: Vec<(usize, Quantities)> = if parallel {
        first_level.par_iter().map(solve_first).collect::<Result<_, _>>()?
    } else {
        first_level.iter().map(solve_first).collect::<Result<_, _>>()?
    };
    let mut nodes = roots.len() as u64;
    let mut best: Option<Candidate> = None;
    let mut aborted = false;

    if target == 1 {
        for (g, sol) in roots {
            let mut sub = Subtree {
                inst,
                prune: opts.prune,
                floor: f64::NEG_INFINITY,
                deadline,
                best: None,
                nodes: 0,
                aborted: false,
            };
            sub.leaf(vec![g], sol);
            if let Some(c) = sub.best {
                keep_best(&mut best, c);
            }
        }
        return Ok(Outcome { best, nodes, aborted });
    }

    roots.sort_by(|a, b| b.1.value.total_cmp(&a.1.value).then(a.0.cmp(&b.0)));
    for chunk in roots.chunks(CHUNK) {
        let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
        let explore = |(g, bound): &(usize, Quantities)| -> Result<Subtree<'_, '_>, SolverError> {
            let mut sub = Subtree {
                inst,
                prune: opts.prune,
                floor,
                deadline,
                best: None,
                nodes: 0,
                aborted: false,
            };
            let pruned = sub.prune && bound.value < floor - prune_tolerance(floor);
            if !pruned && !sub.out_of_time() {
                sub.expand(&mut vec![*g], bound)?;
            }
            Ok(sub)
        };
        let results: Vec<Subtree<'_, '_>> = if parallel {
            chunk.par_iter().map(explore).collect::<Result<_, _>>()?
        } else {
            chunk.iter().map(explore).collect::<Result<_, _>>()?
        };
        for sub in results {
            nodes += sub.nodes;
            aborted |= sub.aborted;
            if let Some(c) = sub.best {
                keep_best(&mut best, c);
            }
        }
        if aborted {
            break;
        }
    }
    Ok(Outcome { best, nodes, aborted })
}
