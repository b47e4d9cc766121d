//! Exact 0-1 optimum of the coverage-constrained knapsack.
//!
//! Depth-first branch and bound over units ordered by `(v + nu*) / w`, where
//! `nu*` is the coverage price of the root LP. The bound at a node is the
//! Dantzig bound of the residual knapsack with coverage priced at `nu*`:
//!
//! ```text
//! value(fixed) + LP_knapsack(v + nu*, residual budget) - nu* * residual floor
//! ```
//!
//! This equals the LP relaxation at the root and upper-bounds the residual LP
//! everywhere below, so pruning is admissible. With prefix sums it costs
//! `O(log n)` per node.
//!
//! Among equal-value optima the lexicographically smallest decision vector
//! (original unit order, `false < true`) is returned. Nodes whose bound ties
//! the incumbent are therefore still expanded.

use crate::error::SolveError;
use crate::lp::{round_lp_to_feasible, solve_lp};
use crate::model::{Allocation, BinaryAllocation, ProblemInstance, SolveReport};

pub const DEFAULT_NODE_LIMIT: usize = 10_000_000;
/// Largest instance accepted by [`solve_exhaustive`].
pub const EXHAUSTIVE_MAX_UNITS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactConfig {
    /// Explored-node cap; past it the best allocation found so far is returned
    /// with `optimal = false`.
    pub node_limit: usize,
    /// Keep a record of every bound-based prune.
    pub record_prunes: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            node_limit: DEFAULT_NODE_LIMIT,
            record_prunes: false,
        }
    }
}

/// A node discarded because its bound fell below the incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneRecord {
    /// Units fixed on the path to the node (original indices) and their values.
    pub fixed: Vec<(usize, bool)>,
    pub bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutcome {
    pub report: SolveReport,
    pub nodes: usize,
    pub prunes: Vec<PruneRecord>,
}

/// Exact optimum with the default node limit.
pub fn solve_exact(inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
    solve_exact_with(inst, ExactConfig::default()).map(|o| o.report)
}

pub fn solve_exact_with(
    inst: &ProblemInstance,
    cfg: ExactConfig,
) -> Result<ExactOutcome, SolveError> {
    inst.ensure_feasible()?;
    let lp = solve_lp(inst)?;
    let seed = round_lp_to_feasible(&lp, inst).ok();
    let mut search = Search::new(inst, lp.prices.nu, cfg, seed);
    search.run();
    let optimal = !search.aborted;
    let nodes = search.nodes;
    let prunes = std::mem::take(&mut search.prunes);
    let best = search.best.ok_or(SolveError::Infeasible {
        floor: inst.coverage_floor(),
        min_cost: inst.min_coverage_cost(),
        budget: inst.budget(),
    })?;
    let alloc = BinaryAllocation::new(inst, best.1)?;
    let report = SolveReport::new("exact", inst, Allocation::Binary(alloc))
        .with_iterations(nodes)
        .with_optimal(optimal);
    Ok(ExactOutcome {
        report,
        nodes,
        prunes,
    })
}

enum Frame {
    Visit(usize),
    Include(usize),
    Exclude(usize),
    Undo { depth: usize, value: f64, cost: f64 },
}

struct Search<'a> {
    inst: &'a ProblemInstance,
    order: Vec<usize>,
    /// `v + nu*` in search order.
    shifted: Vec<f64>,
    /// Number of leading positions with positive shifted value.
    positive: usize,
    cum_cost: Vec<f64>,
    cum_shifted: Vec<f64>,
    suffix_min_cost: Vec<f64>,
    nu: f64,
    tol: f64,
    limit: f64,
    floor: usize,
    cfg: ExactConfig,

    x: Vec<bool>,
    value: f64,
    cost: f64,
    count: usize,
    best: Option<(f64, Vec<bool>)>,
    nodes: usize,
    aborted: bool,
    prunes: Vec<PruneRecord>,
}

impl<'a> Search<'a> {
    fn new(
        inst: &'a ProblemInstance,
        nu: f64,
        cfg: ExactConfig,
        seed: Option<BinaryAllocation>,
    ) -> Self {
        let n = inst.len();
        let v = inst.values();
        let w = inst.costs();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            ((v[b] + nu) / w[b])
                .total_cmp(&((v[a] + nu) / w[a]))
                .then(v[b].total_cmp(&v[a]))
                .then(a.cmp(&b))
        });
        let shifted: Vec<f64> = order.iter().map(|&i| v[i] + nu).collect();
        let positive = shifted.iter().take_while(|&&u| u > 0.0).count();
        let mut cum_cost = vec![0.0; positive + 1];
        let mut cum_shifted = vec![0.0; positive + 1];
        for p in 0..positive {
            cum_cost[p + 1] = cum_cost[p] + w[order[p]];
            cum_shifted[p + 1] = cum_shifted[p] + shifted[p];
        }
        let mut suffix_min_cost = vec![f64::INFINITY; n + 1];
        for p in (0..n).rev() {
            suffix_min_cost[p] = suffix_min_cost[p + 1].min(w[order[p]]);
        }
        let scale = 1.0 + v.iter().map(|x| x.abs()).sum::<f64>() + nu * n as f64;
        let best = seed
            .filter(|a| a.is_feasible(inst))
            .map(|a| (a.value(), a.into_decisions()));
        Self {
            inst,
            order,
            shifted,
            positive,
            cum_cost,
            cum_shifted,
            suffix_min_cost,
            nu,
            tol: 1e-9 * scale,
            limit: inst.budget_limit(),
            floor: inst.coverage_floor(),
            cfg,
            x: vec![false; n],
            value: 0.0,
            cost: 0.0,
            count: 0,
            best,
            nodes: 0,
            aborted: false,
            prunes: Vec::new(),
        }
    }

    /// Dantzig bound on the shifted values over positions `depth..` with the
    /// given residual budget.
    fn knapsack_bound(&self, depth: usize, residual: f64) -> f64 {
        if depth >= self.positive {
            return 0.0;
        }
        let base = self.cum_cost[depth];
        let span = &self.cum_cost[depth..=self.positive];
        // last position e with cum_cost[e] - base <= residual
        let e = depth + span.partition_point(|&c| c - base <= residual) - 1;
        let mut bound = self.cum_shifted[e] - self.cum_shifted[depth];
        if e < self.positive {
            let left = residual - (self.cum_cost[e] - base);
            bound += left.max(0.0) * self.shifted[e] / self.inst.costs()[self.order[e]];
        }
        bound
    }

    fn offer(&mut self) {
        let better = match &self.best {
            None => true,
            Some((best, dec)) => {
                self.value > *best || (self.value == *best && lex_less(&self.x, dec))
            }
        };
        if better {
            self.best = Some((self.value, self.x.clone()));
        }
    }

    fn run(&mut self) {
        let n = self.inst.len();
        let mut stack = vec![Frame::Visit(0)];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Visit(depth) => {
                    self.nodes += 1;
                    if self.nodes > self.cfg.node_limit {
                        self.aborted = true;
                        break;
                    }
                    if self.count >= self.floor {
                        self.offer();
                    }
                    if depth == n {
                        continue;
                    }
                    let short = self.floor.saturating_sub(self.count);
                    let residual = (self.inst.budget() - self.cost).max(0.0);
                    if n - depth < short
                        || (short > 0
                            && self.suffix_min_cost[depth] * short as f64 > self.limit - self.cost)
                    {
                        continue;
                    }
                    let bound =
                        self.value + self.knapsack_bound(depth, residual) - self.nu * short as f64;
                    if let Some((incumbent, _)) = &self.best {
                        if bound < incumbent - self.tol {
                            if self.cfg.record_prunes {
                                let fixed = self.order[..depth]
                                    .iter()
                                    .map(|&i| (i, self.x[i]))
                                    .collect();
                                self.prunes.push(PruneRecord {
                                    fixed,
                                    bound,
                                    incumbent: *incumbent,
                                });
                            }
                            continue;
                        }
                    }
                    stack.push(Frame::Exclude(depth));
                    if self.cost + self.inst.costs()[self.order[depth]] <= self.limit {
                        stack.push(Frame::Include(depth));
                    }
                }
                Frame::Include(depth) => {
                    let i = self.order[depth];
                    stack.push(Frame::Undo {
                        depth,
                        value: self.value,
                        cost: self.cost,
                    });
                    self.x[i] = true;
                    self.value += self.inst.values()[i];
                    self.cost += self.inst.costs()[i];
                    self.count += 1;
                    stack.push(Frame::Visit(depth + 1));
                }
                Frame::Undo { depth, value, cost } => {
                    self.x[self.order[depth]] = false;
                    self.value = value;
                    self.cost = cost;
                    self.count -= 1;
                }
                Frame::Exclude(depth) => stack.push(Frame::Visit(depth + 1)),
            }
        }
    }
}

/// `a < b` lexicographically with `false < true`.
fn lex_less(a: &[bool], b: &[bool]) -> bool {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, _)| !x)
}

/// Enumerates all `2^n` subsets. Same contract and tie-break as [`solve_exact`].
pub fn solve_exhaustive(inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
    let n = inst.len();
    if n > EXHAUSTIVE_MAX_UNITS {
        return Err(SolveError::TooLarge {
            n,
            max: EXHAUSTIVE_MAX_UNITS,
        });
    }
    inst.ensure_feasible()?;
    let v = inst.values();
    let w = inst.costs();
    let limit = inst.budget_limit();
    let floor = inst.coverage_floor();
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1u32 << n) {
        if (mask.count_ones() as usize) < floor {
            continue;
        }
        let (mut value, mut cost) = (0.0, 0.0);
        for i in (0..n).filter(|i| (mask >> i) & 1 == 1) {
            value += v[i];
            cost += w[i];
        }
        if cost > limit {
            continue;
        }
        let better = match best {
            None => true,
            Some((bv, bm)) => {
                value > bv
                    || (value == bv && {
                        let first = (mask ^ bm).trailing_zeros();
                        (mask >> first) & 1 == 0
                    })
            }
        };
        if better {
            best = Some((value, mask));
        }
    }
    let (_, mask) = best.expect("feasible instance has a feasible subset");
    let decisions = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
    let alloc = BinaryAllocation::new(inst, decisions)?;
    Ok(SolveReport::new("exhaustive", inst, Allocation::Binary(alloc)).with_iterations(1 << n))
}
