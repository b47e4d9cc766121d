//! LP relaxation of the coverage-constrained knapsack.
//!
//! The relaxation has only two global rows (budget and coverage) on top of the
//! unit box, so its optimum is found without a general simplex:
//!
//! * coverage ignored: fractional-knapsack fill of the positive-value units by
//!   decreasing `v/w`. If the resulting mass already meets the floor the
//!   solution is optimal and `nu = 0`.
//! * otherwise the mass is pinned to the floor and the budget multiplier is
//!   bisected; the optimum mixes the two top-`K` sets on either side of the
//!   breakpoint, which leaves at most two fractional coordinates.

use std::cmp::Ordering;

use crate::error::SolveError;
use crate::model::{
    ratio_order, Allocation, BinaryAllocation, DualPrices, FractionalAllocation, ProblemInstance,
    SolveReport, FRACTIONAL_EPS,
};

/// Maximum number of bisection steps on the budget multiplier.
pub const MAX_BISECTION_STEPS: usize = 200;
/// Largest multiplier tried while bracketing.
const LAMBDA_CAP: f64 = 1e300;

/// Which constraint structure produced the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpPhase {
    /// Coverage slack at the budget-only optimum.
    CoverageSlack,
    /// Mass pinned to the coverage floor.
    CoveragePinned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub allocation: FractionalAllocation,
    pub objective: f64,
    pub prices: DualPrices,
    pub fractional_indices: Vec<usize>,
    pub phase: LpPhase,
    pub bisection_steps: usize,
    /// False if the multiplier bracket did not collapse within the step limit.
    pub converged: bool,
}

impl LpSolution {
    fn build(
        inst: &ProblemInstance,
        weights: Vec<f64>,
        prices: DualPrices,
        phase: LpPhase,
        bisection_steps: usize,
        converged: bool,
    ) -> Self {
        let allocation =
            FractionalAllocation::new(inst, weights).expect("weights sized to the instance");
        let fractional_indices = allocation.fractional_indices();
        Self {
            objective: allocation.value(),
            allocation,
            prices,
            fractional_indices,
            phase,
            bisection_steps,
            converged,
        }
    }

    /// `lambda * (cost - W)` and `nu * (K - mass)`.
    pub fn slackness_residuals(&self, inst: &ProblemInstance) -> (f64, f64) {
        (
            self.prices.lambda * (self.allocation.cost() - inst.budget()),
            self.prices.nu * (inst.coverage_floor() as f64 - self.allocation.mass()),
        )
    }

    pub fn into_report(self, inst: &ProblemInstance) -> SolveReport {
        let prices = self.prices;
        let steps = self.bisection_steps;
        let converged = self.converged;
        SolveReport::new("lp", inst, Allocation::Fractional(self.allocation))
            .with_prices(prices)
            .with_iterations(steps)
            .with_optimal(converged)
    }
}

/// Solves the LP relaxation to an optimal extreme point with dual prices.
pub fn solve_lp(inst: &ProblemInstance) -> Result<LpSolution, SolveError> {
    inst.ensure_feasible()?;
    if let Some(sol) = budget_only(inst) {
        return Ok(sol);
    }
    coverage_pinned(inst)
}

fn budget_only(inst: &ProblemInstance) -> Option<LpSolution> {
    let n = inst.len();
    let mut weights = vec![0.0; n];
    let mut remaining = inst.budget();
    let mut marginal = None;
    for i in ratio_order(inst) {
        if inst.values()[i] <= 0.0 {
            break;
        }
        let w = inst.costs()[i];
        if w <= remaining {
            weights[i] = 1.0;
            remaining -= w;
        } else {
            weights[i] = (remaining / w).clamp(0.0, 1.0);
            marginal = Some(i);
            break;
        }
    }
    let mass: f64 = weights.iter().sum();
    if mass < inst.coverage_floor() as f64 - FRACTIONAL_EPS {
        return None;
    }
    let lambda = marginal.map_or(0.0, |i| inst.ratio(i));
    Some(LpSolution::build(
        inst,
        weights,
        DualPrices::new(lambda, 0.0),
        LpPhase::CoverageSlack,
        0,
        true,
    ))
}

/// Order used to pick the top-`K` set at a multiplier: score descending, then
/// cheaper first so the selected set has minimal cost among score ties.
fn score_cmp(inst: &ProblemInstance, lambda: f64, a: usize, b: usize) -> Ordering {
    let sa = inst.values()[a] - lambda * inst.costs()[a];
    let sb = inst.values()[b] - lambda * inst.costs()[b];
    sb.total_cmp(&sa)
        .then(inst.costs()[a].total_cmp(&inst.costs()[b]))
        .then(a.cmp(&b))
}

/// Indicator and cost of the `k` best units by `v - lambda w`.
fn top_k(
    inst: &ProblemInstance,
    lambda: f64,
    k: usize,
    scratch: &mut Vec<usize>,
) -> (Vec<bool>, f64) {
    scratch.clear();
    scratch.extend(0..inst.len());
    let mut selected = vec![false; inst.len()];
    if k == 0 {
        return (selected, 0.0);
    }
    if k < inst.len() {
        scratch.select_nth_unstable_by(k - 1, |&a, &b| score_cmp(inst, lambda, a, b));
    }
    let mut cost = 0.0;
    for &i in &scratch[..k] {
        selected[i] = true;
        cost += inst.costs()[i];
    }
    (selected, cost)
}

fn coverage_pinned(inst: &ProblemInstance) -> Result<LpSolution, SolveError> {
    let k = inst.coverage_floor();
    let budget = inst.budget();
    let mut scratch = Vec::with_capacity(inst.len());

    let (at_zero, cost_zero) = top_k(inst, 0.0, k, &mut scratch);
    if cost_zero <= budget {
        let weights: Vec<f64> = at_zero.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
        let nu = coverage_price(inst, 0.0, &weights);
        return Ok(LpSolution::build(
            inst,
            weights,
            DualPrices::new(0.0, nu),
            LpPhase::CoveragePinned,
            0,
            true,
        ));
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let (mut hi_set, mut hi_cost) = top_k(inst, hi, k, &mut scratch);
    while hi_cost > budget {
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_CAP {
            return Err(SolveError::BracketOverflow(LAMBDA_CAP));
        }
        (hi_set, hi_cost) = top_k(inst, hi, k, &mut scratch);
    }

    let mut steps = 0;
    while steps < MAX_BISECTION_STEPS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        steps += 1;
        let (set, cost) = top_k(inst, mid, k, &mut scratch);
        if cost <= budget {
            hi = mid;
            hi_set = set;
            hi_cost = cost;
        } else {
            lo = mid;
        }
    }
    let converged = hi - lo <= 1e-12 * hi.max(1.0);
    let (lo_set, _) = top_k(inst, lo, k, &mut scratch);

    // Mix the two sets: swap the cheapest units only in the feasible set for
    // the most expensive units only in the infeasible set until the budget is
    // met exactly. Units in the symmetric difference are tied at the breakpoint.
    let mut weights: Vec<f64> = hi_set.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    let mut leaving: Vec<usize> = (0..inst.len())
        .filter(|&i| hi_set[i] && !lo_set[i])
        .collect();
    let mut entering: Vec<usize> = (0..inst.len())
        .filter(|&i| lo_set[i] && !hi_set[i])
        .collect();
    leaving.sort_by(|&a, &b| inst.costs()[a].total_cmp(&inst.costs()[b]).then(a.cmp(&b)));
    entering.sort_by(|&a, &b| inst.costs()[b].total_cmp(&inst.costs()[a]).then(a.cmp(&b)));
    let mut need = budget - hi_cost;
    for (&out, &inn) in leaving.iter().zip(&entering) {
        if need <= 0.0 {
            break;
        }
        let delta = inst.costs()[inn] - inst.costs()[out];
        if delta <= 0.0 {
            break;
        }
        if delta <= need {
            weights[out] = 0.0;
            weights[inn] = 1.0;
            need -= delta;
        } else {
            let t = need / delta;
            weights[out] = 1.0 - t;
            weights[inn] = t;
            break;
        }
    }

    let lambda = lo + 0.5 * (hi - lo);
    let nu = coverage_price(inst, lambda, &weights);
    Ok(LpSolution::build(
        inst,
        weights,
        DualPrices::new(lambda, nu),
        LpPhase::CoveragePinned,
        steps,
        converged,
    ))
}

/// `nu = -(score of the marginal unit)`: the smallest `v - lambda w` among units
/// carrying positive weight, floored at zero.
fn coverage_price(inst: &ProblemInstance, lambda: f64, weights: &[f64]) -> f64 {
    let marginal = weights
        .iter()
        .enumerate()
        .filter(|(_, &z)| z > FRACTIONAL_EPS)
        .map(|(i, _)| inst.values()[i] - lambda * inst.costs()[i])
        .fold(f64::INFINITY, f64::min);
    if marginal.is_finite() {
        (-marginal).max(0.0)
    } else {
        0.0
    }
}

/// Largest instance accepted by [`enumerate_extreme_points_oracle`].
pub const ORACLE_MAX_UNITS: usize = 10;

/// Brute-force LP optimum: every vertex of the relaxation has at least `n - 2`
/// coordinates at a bound, so it suffices to fix all other coordinates to 0/1
/// and solve the residual two-variable polygon at each pair of active lines.
///
/// Only the primal objective is certified; `prices` is left at zero.
pub fn enumerate_extreme_points_oracle(inst: &ProblemInstance) -> Result<LpSolution, SolveError> {
    let n = inst.len();
    if n > ORACLE_MAX_UNITS {
        return Err(SolveError::TooLarge {
            n,
            max: ORACLE_MAX_UNITS,
        });
    }
    inst.ensure_feasible()?;
    let v = inst.values();
    let w = inst.costs();
    let budget = inst.budget();
    let floor = inst.coverage_floor() as f64;
    let tol = 1e-9 * (1.0 + budget);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |z: &[f64]| {
        let cost: f64 = z.iter().zip(w).map(|(a, b)| a * b).sum();
        let mass: f64 = z.iter().sum();
        let inside = z.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x));
        if inside && cost <= budget + tol && mass >= floor - 1e-9 {
            let value: f64 = z.iter().zip(v).map(|(a, b)| a * b).sum();
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, z.iter().map(|x| x.clamp(0.0, 1.0)).collect()));
            }
        }
    };

    if n == 1 {
        for z in [0.0, 1.0, budget / w[0], floor] {
            consider(&[z]);
        }
    } else {
        // lines a*x + b*y = c over the two free coordinates (x, y)
        let mut z = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..n {
                let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
                for mask in 0u32..(1 << others.len()) {
                    let (mut fixed_cost, mut fixed_mass) = (0.0, 0.0);
                    for (bit, &k) in others.iter().enumerate() {
                        let on = (mask >> bit) & 1 == 1;
                        z[k] = if on { 1.0 } else { 0.0 };
                        if on {
                            fixed_cost += w[k];
                            fixed_mass += 1.0;
                        }
                    }
                    let lines = [
                        (1.0, 0.0, 0.0),
                        (1.0, 0.0, 1.0),
                        (0.0, 1.0, 0.0),
                        (0.0, 1.0, 1.0),
                        (w[i], w[j], budget - fixed_cost),
                        (1.0, 1.0, floor - fixed_mass),
                    ];
                    for p in 0..lines.len() {
                        for q in p + 1..lines.len() {
                            let (a1, b1, c1) = lines[p];
                            let (a2, b2, c2) = lines[q];
                            let det = a1 * b2 - a2 * b1;
                            if det.abs() < 1e-15 {
                                continue;
                            }
                            z[i] = (c1 * b2 - c2 * b1) / det;
                            z[j] = (a1 * c2 - a2 * c1) / det;
                            consider(&z);
                        }
                    }
                }
            }
        }
    }

    let (_, weights) = best.ok_or(SolveError::Infeasible {
        floor: inst.coverage_floor(),
        min_cost: inst.min_coverage_cost(),
        budget,
    })?;
    Ok(LpSolution::build(
        inst,
        weights,
        DualPrices::ZERO,
        LpPhase::CoverageSlack,
        0,
        true,
    ))
}

/// Rounds an LP extreme point to a feasible 0-1 allocation.
///
/// Fractional coordinates are rounded down. If coverage is then short, they are
/// rounded up cheapest first while the budget allows, and after that the
/// cheapest untreated units are added.
pub fn round_lp_to_feasible(
    sol: &LpSolution,
    inst: &ProblemInstance,
) -> Result<BinaryAllocation, SolveError> {
    let weights = sol.allocation.weights();
    if weights.len() != inst.len() {
        return Err(SolveError::LengthMismatch {
            expected: inst.len(),
            got: weights.len(),
        });
    }
    let mut decisions: Vec<bool> = weights.iter().map(|&z| z >= 1.0 - FRACTIONAL_EPS).collect();
    let mut cost: f64 = (0..inst.len())
        .filter(|&i| decisions[i])
        .map(|i| inst.costs()[i])
        .sum();
    let mut count = decisions.iter().filter(|&&d| d).count();
    let limit = inst.budget_limit();
    let floor = inst.coverage_floor();

    let mut fractional = sol.fractional_indices.clone();
    fractional.sort_by(|&a, &b| inst.costs()[a].total_cmp(&inst.costs()[b]).then(a.cmp(&b)));
    let excluded = inst.cost_order().iter().copied();
    for i in fractional.into_iter().chain(excluded) {
        if count >= floor {
            break;
        }
        if !decisions[i] && cost + inst.costs()[i] <= limit {
            decisions[i] = true;
            cost += inst.costs()[i];
            count += 1;
        }
    }
    if count < floor {
        return Err(SolveError::RoundingInfeasible);
    }
    BinaryAllocation::new(inst, decisions)
}

/// `LP - OPT`, in `[0, 2 V_max]`.
pub fn integrality_gap(inst: &ProblemInstance) -> Result<f64, SolveError> {
    let lp = solve_lp(inst)?;
    let exact = crate::exact::solve_exact(inst)?;
    Ok(lp.objective - exact.objective)
}
