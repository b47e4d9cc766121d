//! Rank-and-cut: order units by cost-effectiveness `v/w` and treat a leading
//! segment of that ranking.
//!
//! Three decision procedures share the ranking:
//! * [`rc_prefix_solve`] picks the best feasible prefix (strict cut).
//! * [`rc_greedy_skip_solve`] forces the top `K`, then adds every further
//!   positive-ratio unit that fits, skipping those that do not.
//! * [`rc_with_target_count`] treats exactly the top `target` units and ignores
//!   the budget; used to calibrate against another policy's treated count.

use crate::error::SolveError;
use crate::model::{ratio_order, Allocation, BinaryAllocation, ProblemInstance, SolveReport};

/// A ratio ranking with prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedOrder {
    /// Unit indices, best ratio first.
    pub order: Vec<usize>,
    /// `v/w` along `order`.
    pub scores: Vec<f64>,
    /// `cum_value[k]` is the value of the top-`k` prefix; `cum_value[0] = 0`.
    pub cum_value: Vec<f64>,
    pub cum_cost: Vec<f64>,
}

impl RankedOrder {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Indices of the top-`k` prefix.
    pub fn prefix(&self, k: usize) -> &[usize] {
        &self.order[..k]
    }
}

/// Stable descending sort by `v/w`; ties by larger value, then lower index.
pub fn rank_by_ratio(inst: &ProblemInstance) -> RankedOrder {
    let order = ratio_order(inst);
    let scores: Vec<f64> = order.iter().map(|&i| inst.ratio(i)).collect();
    let mut cum_value = Vec::with_capacity(order.len() + 1);
    let mut cum_cost = Vec::with_capacity(order.len() + 1);
    let (mut tv, mut tc) = (0.0, 0.0);
    cum_value.push(tv);
    cum_cost.push(tc);
    for &i in &order {
        tv += inst.values()[i];
        tc += inst.costs()[i];
        cum_value.push(tv);
        cum_cost.push(tc);
    }
    RankedOrder {
        order,
        scores,
        cum_value,
        cum_cost,
    }
}

fn report(
    inst: &ProblemInstance,
    method: &'static str,
    treated: &[usize],
) -> Result<SolveReport, SolveError> {
    let alloc = BinaryAllocation::from_indices(inst, treated)?;
    Ok(SolveReport::new(method, inst, Allocation::Binary(alloc)))
}

/// Best prefix `k* = argmax { T_k : k >= K, C_k <= W }`, smallest `k` on ties.
///
/// The empty prefix counts only when the coverage floor is zero.
pub fn rc_prefix_solve(inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
    let ranked = rank_by_ratio(inst);
    let limit = inst.budget_limit();
    let mut best: Option<usize> = None;
    for k in inst.coverage_floor()..=inst.len() {
        if ranked.cum_cost[k] > limit {
            // prefix costs only grow
            break;
        }
        if best.is_none_or(|b| ranked.cum_value[k] > ranked.cum_value[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(SolveError::NoFeasibleCutoff)?;
    report(inst, "rc-prefix", ranked.prefix(k))
}

/// Core of the top `K` by ratio, then greedy skip-and-continue augmentation
/// over positive-ratio units.
pub fn rc_greedy_skip_solve(inst: &ProblemInstance) -> Result<SolveReport, SolveError> {
    let ranked = rank_by_ratio(inst);
    let floor = inst.coverage_floor();
    let limit = inst.budget_limit();
    let core_cost = ranked.cum_cost[floor];
    if core_cost > limit {
        return Err(SolveError::CoreInfeasible {
            floor,
            cost: core_cost,
            budget: inst.budget(),
        });
    }
    let mut treated = ranked.prefix(floor).to_vec();
    let mut cost = core_cost;
    for (&i, &score) in ranked.order[floor..].iter().zip(&ranked.scores[floor..]) {
        if score <= 0.0 {
            break;
        }
        if cost + inst.costs()[i] <= limit {
            cost += inst.costs()[i];
            treated.push(i);
        }
    }
    report(inst, "rc-skip", &treated)
}

/// Exactly the top-`target` units by ratio, budget ignored. The report's
/// feasibility can be read from `allocation.is_feasible`.
pub fn rc_with_target_count(
    inst: &ProblemInstance,
    target: usize,
) -> Result<SolveReport, SolveError> {
    if target > inst.len() {
        return Err(SolveError::TargetOutOfRange {
            target,
            n: inst.len(),
        });
    }
    let ranked = rank_by_ratio(inst);
    report(inst, "rc-target", ranked.prefix(target))
}

/// Ratio of the last unit treated by a ranking-based allocation. With nothing
/// treated the top ratio is returned, a threshold no unit exceeds.
pub fn rc_threshold(inst: &ProblemInstance, alloc: &BinaryAllocation) -> f64 {
    alloc
        .treated()
        .into_iter()
        .map(|i| inst.ratio(i))
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))))
        .unwrap_or_else(|| {
            (0..inst.len())
                .map(|i| inst.ratio(i))
                .fold(f64::NEG_INFINITY, f64::max)
        })
}
