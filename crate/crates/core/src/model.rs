//! Instance representation, allocations and the affine threshold rule shared
//! by every solver.
//!
//! All budget comparisons use a relative tolerance of [`BUDGET_RTOL`] times the
//! budget. Coverage is an integer count and is compared exactly.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, SolveError};

/// Relative slack allowed on the budget constraint.
pub const BUDGET_RTOL: f64 = 1e-9;

/// A finite 0-1 knapsack with a minimum-coverage floor.
///
/// Values may be negative; costs are strictly positive. Derived quantities
/// (largest absolute value, cost ordering) are computed on first use.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    values: Vec<f64>,
    costs: Vec<f64>,
    budget: f64,
    coverage_floor: usize,
    v_max: OnceLock<f64>,
    cost_order: OnceLock<Vec<usize>>,
}

impl PartialEq for ProblemInstance {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
            && self.costs == other.costs
            && self.budget == other.budget
            && self.coverage_floor == other.coverage_floor
    }
}

impl ProblemInstance {
    /// Validates the raw data and builds an instance.
    pub fn new(
        values: Vec<f64>,
        costs: Vec<f64>,
        budget: f64,
        coverage_floor: usize,
    ) -> Result<Self, InstanceError> {
        if values.len() != costs.len() {
            return Err(InstanceError::LengthMismatch {
                values: values.len(),
                costs: costs.len(),
            });
        }
        if values.is_empty() {
            return Err(InstanceError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(InstanceError::NonFiniteEntry {
                field: "values",
                index,
            });
        }
        if let Some(index) = costs.iter().position(|w| !w.is_finite()) {
            return Err(InstanceError::NonFiniteEntry {
                field: "costs",
                index,
            });
        }
        if let Some(index) = costs.iter().position(|&w| w <= 0.0) {
            return Err(InstanceError::NonPositiveCost {
                index,
                cost: costs[index],
            });
        }
        if !(budget.is_finite() && budget > 0.0) {
            return Err(InstanceError::NonPositiveBudget(budget));
        }
        if coverage_floor > values.len() {
            return Err(InstanceError::CoverageOutOfRange {
                floor: coverage_floor,
                n: values.len(),
            });
        }
        Ok(Self {
            values,
            costs,
            budget,
            coverage_floor,
            v_max: OnceLock::new(),
            cost_order: OnceLock::new(),
        })
    }

    /// Builds an instance from per-capita constraints: budget `n * per_capita_budget`
    /// and floor `ceil(n * coverage_share)`.
    pub fn from_per_capita(
        values: Vec<f64>,
        costs: Vec<f64>,
        per_capita_budget: f64,
        coverage_share: f64,
    ) -> Result<Self, InstanceError> {
        let n = values.len();
        let floor = coverage_floor_for(n, coverage_share);
        Self::new(values, costs, n as f64 * per_capita_budget, floor)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn coverage_floor(&self) -> usize {
        self.coverage_floor
    }

    /// `max |v_i|`.
    pub fn v_max(&self) -> f64 {
        *self
            .v_max
            .get_or_init(|| self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    pub fn w_min(&self) -> f64 {
        self.costs[self.cost_order()[0]]
    }

    pub fn w_max(&self) -> f64 {
        self.costs[*self.cost_order().last().expect("non-empty instance")]
    }

    /// Unit indices by increasing cost, ties by index.
    pub fn cost_order(&self) -> &[usize] {
        self.cost_order.get_or_init(|| {
            let mut order: Vec<usize> = (0..self.len()).collect();
            order.sort_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]).then(a.cmp(&b)));
            order
        })
    }

    /// Sum of the `coverage_floor` smallest costs; zero when the floor is zero.
    pub fn min_coverage_cost(&self) -> f64 {
        self.cost_order()[..self.coverage_floor]
            .iter()
            .map(|&i| self.costs[i])
            .sum()
    }

    /// True iff some binary allocation meets both constraints.
    pub fn is_feasible(&self) -> bool {
        self.min_coverage_cost() <= self.budget_limit()
    }

    /// Fails with [`SolveError::Infeasible`] when no allocation meets both constraints.
    pub fn ensure_feasible(&self) -> Result<(), SolveError> {
        if self.is_feasible() {
            Ok(())
        } else {
            Err(SolveError::Infeasible {
                floor: self.coverage_floor,
                min_cost: self.min_coverage_cost(),
                budget: self.budget,
            })
        }
    }

    /// Largest cost total accepted as within budget.
    pub fn budget_limit(&self) -> f64 {
        self.budget * (1.0 + BUDGET_RTOL)
    }

    /// `v_i - lambda * w_i + nu`.
    pub fn lagrangian_score(&self, i: usize, prices: DualPrices) -> f64 {
        self.values[i] - prices.lambda * self.costs[i] + prices.nu
    }

    /// `v_i / w_i`.
    pub fn ratio(&self, i: usize) -> f64 {
        self.values[i] / self.costs[i]
    }
}

/// Unit indices by decreasing `v_i / w_i`; ties go to the larger value, then
/// the lower index.
pub fn ratio_order(inst: &ProblemInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inst.len()).collect();
    order.sort_by(|&a, &b| {
        inst.ratio(b)
            .total_cmp(&inst.ratio(a))
            .then(inst.values()[b].total_cmp(&inst.values()[a]))
            .then(a.cmp(&b))
    });
    order
}

/// `ceil(n * share)`, clamped to `0..=n`. Products within 1e-9 of an integer
/// are not bumped up by representation error.
pub fn coverage_floor_for(n: usize, share: f64) -> usize {
    let raw = (n as f64 * share - 1e-9).ceil();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(n)
    }
}

/// Shadow prices of the budget (`lambda`) and coverage (`nu`) constraints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPrices {
    pub lambda: f64,
    pub nu: f64,
}

impl DualPrices {
    pub const ZERO: DualPrices = DualPrices {
        lambda: 0.0,
        nu: 0.0,
    };

    pub fn new(lambda: f64, nu: f64) -> Self {
        debug_assert!(lambda >= 0.0 && nu >= 0.0, "prices must be non-negative");
        Self { lambda, nu }
    }
}

/// A 0-1 treatment vector with cached totals.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAllocation {
    decisions: Vec<bool>,
    value: f64,
    cost: f64,
    count: usize,
}

impl BinaryAllocation {
    pub fn new(inst: &ProblemInstance, decisions: Vec<bool>) -> Result<Self, SolveError> {
        if decisions.len() != inst.len() {
            return Err(SolveError::LengthMismatch {
                expected: inst.len(),
                got: decisions.len(),
            });
        }
        let (mut value, mut cost, mut count) = (0.0, 0.0, 0);
        for (i, _) in decisions.iter().enumerate().filter(|(_, &d)| d) {
            value += inst.values[i];
            cost += inst.costs[i];
            count += 1;
        }
        Ok(Self {
            decisions,
            value,
            cost,
            count,
        })
    }

    /// Allocation treating exactly the listed units.
    pub fn from_indices(inst: &ProblemInstance, treated: &[usize]) -> Result<Self, SolveError> {
        let mut decisions = vec![false; inst.len()];
        for &i in treated {
            if i >= inst.len() {
                return Err(SolveError::LengthMismatch {
                    expected: inst.len(),
                    got: i + 1,
                });
            }
            decisions[i] = true;
        }
        Self::new(inst, decisions)
    }

    pub fn empty(inst: &ProblemInstance) -> Self {
        Self {
            decisions: vec![false; inst.len()],
            value: 0.0,
            cost: 0.0,
            count: 0,
        }
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.decisions[i]
    }

    /// Treated indices in increasing order.
    pub fn treated(&self) -> Vec<usize> {
        self.decisions
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| d.then_some(i))
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_feasible(&self, inst: &ProblemInstance) -> bool {
        self.cost <= inst.budget_limit() && self.count >= inst.coverage_floor()
    }

    pub fn into_decisions(self) -> Vec<bool> {
        self.decisions
    }
}

/// A `[0,1]^n` vector, produced only by the LP relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    weights: Vec<f64>,
    value: f64,
    cost: f64,
    mass: f64,
}

/// Band around 0 and 1 within which an LP coordinate counts as integral.
pub const FRACTIONAL_EPS: f64 = 1e-9;

impl FractionalAllocation {
    pub fn new(inst: &ProblemInstance, weights: Vec<f64>) -> Result<Self, SolveError> {
        if weights.len() != inst.len() {
            return Err(SolveError::LengthMismatch {
                expected: inst.len(),
                got: weights.len(),
            });
        }
        debug_assert!(weights
            .iter()
            .all(|&z| (-FRACTIONAL_EPS..=1.0 + FRACTIONAL_EPS).contains(&z)));
        let (mut value, mut cost, mut mass) = (0.0, 0.0, 0.0);
        for (i, &z) in weights.iter().enumerate() {
            value += inst.values[i] * z;
            cost += inst.costs[i] * z;
            mass += z;
        }
        Ok(Self {
            weights,
            value,
            cost,
            mass,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Indices strictly inside `(eps, 1 - eps)`.
    pub fn fractional_indices(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter_map(|(i, &z)| (z > FRACTIONAL_EPS && z < 1.0 - FRACTIONAL_EPS).then_some(i))
            .collect()
    }
}

/// Either kind of allocation a solver may return.
#[derive(Debug, Clone, PartialEq)]
pub enum Allocation {
    Binary(BinaryAllocation),
    Fractional(FractionalAllocation),
}

impl Allocation {
    pub fn value(&self) -> f64 {
        match self {
            Allocation::Binary(a) => a.value(),
            Allocation::Fractional(a) => a.value(),
        }
    }

    pub fn cost(&self) -> f64 {
        match self {
            Allocation::Binary(a) => a.cost(),
            Allocation::Fractional(a) => a.cost(),
        }
    }

    /// Treated count, or total mass for fractional allocations.
    pub fn coverage(&self) -> f64 {
        match self {
            Allocation::Binary(a) => a.count() as f64,
            Allocation::Fractional(a) => a.mass(),
        }
    }

    /// Per-unit weights in `[0,1]`.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Allocation::Binary(a) => a
                .decisions()
                .iter()
                .map(|&d| if d { 1.0 } else { 0.0 })
                .collect(),
            Allocation::Fractional(a) => a.weights().to_vec(),
        }
    }

    pub fn as_binary(&self) -> Option<&BinaryAllocation> {
        match self {
            Allocation::Binary(a) => Some(a),
            Allocation::Fractional(_) => None,
        }
    }

    pub fn as_fractional(&self) -> Option<&FractionalAllocation> {
        match self {
            Allocation::Fractional(a) => Some(a),
            Allocation::Binary(_) => None,
        }
    }
}

/// Output of any solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: &'static str,
    pub allocation: Allocation,
    pub objective: f64,
    pub budget_used: f64,
    pub coverage_used: f64,
    pub budget_binding: bool,
    pub coverage_binding: bool,
    /// Search nodes, bisection steps, or zero for one-pass rules.
    pub iterations: usize,
    pub fractional_count: usize,
    pub dual_prices: Option<DualPrices>,
    /// False when a solver stopped on a work limit before proving its contract.
    pub optimal: bool,
}

impl SolveReport {
    pub fn new(method: &'static str, inst: &ProblemInstance, allocation: Allocation) -> Self {
        let objective = allocation.value();
        let budget_used = allocation.cost();
        let coverage_used = allocation.coverage();
        let budget_binding = inst.budget() - budget_used <= BUDGET_RTOL * inst.budget();
        let coverage_binding = match &allocation {
            Allocation::Binary(a) => a.count() == inst.coverage_floor(),
            Allocation::Fractional(a) => (a.mass() - inst.coverage_floor() as f64).abs() <= 1e-9,
        };
        let fractional_count = allocation
            .as_fractional()
            .map_or(0, |a| a.fractional_indices().len());
        Self {
            method,
            allocation,
            objective,
            budget_used,
            coverage_used,
            budget_binding,
            coverage_binding,
            iterations: 0,
            fractional_count,
            dual_prices: None,
            optimal: true,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_prices(mut self, prices: DualPrices) -> Self {
        self.dual_prices = Some(prices);
        self
    }

    pub fn with_optimal(mut self, optimal: bool) -> Self {
        self.optimal = optimal;
        self
    }

    pub fn binary(&self) -> Option<&BinaryAllocation> {
        self.allocation.as_binary()
    }
}

/// Totals of an allocation given as raw decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationMetrics {
    pub value: f64,
    pub cost: f64,
    pub count: usize,
    pub feasible: bool,
}

pub fn allocation_metrics(
    inst: &ProblemInstance,
    decisions: &[bool],
) -> Result<AllocationMetrics, SolveError> {
    let alloc = BinaryAllocation::new(inst, decisions.to_vec())?;
    Ok(AllocationMetrics {
        value: alloc.value(),
        cost: alloc.cost(),
        count: alloc.count(),
        feasible: alloc.is_feasible(inst),
    })
}

/// Treats unit `i` iff `v_i - lambda w_i + nu >= 0`. No feasibility guarantee.
pub fn threshold_policy(inst: &ProblemInstance, prices: DualPrices) -> BinaryAllocation {
    let decisions = (0..inst.len())
        .map(|i| inst.lagrangian_score(i, prices) >= 0.0)
        .collect();
    BinaryAllocation::new(inst, decisions).expect("length matches by construction")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn six_units() -> ProblemInstance {
        ProblemInstance::new(
            vec![20.0, 18.0, 14.0, 13.0, 8.0, 7.0],
            vec![10.0, 9.0, 4.0, 4.0, 2.0, 2.0],
            12.0,
            2,
        )
        .unwrap()
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            ProblemInstance::new(vec![1.0], vec![0.0], 1.0, 0),
            Err(InstanceError::NonPositiveCost { index: 0, .. })
        ));
        assert!(matches!(
            ProblemInstance::new(vec![1.0, 2.0], vec![1.0], 1.0, 1),
            Err(InstanceError::LengthMismatch { .. })
        ));
        assert!(matches!(
            ProblemInstance::new(vec![1.0], vec![1.0], 0.0, 0),
            Err(InstanceError::NonPositiveBudget(_))
        ));
        assert!(matches!(
            ProblemInstance::new(vec![1.0], vec![1.0], 1.0, 2),
            Err(InstanceError::CoverageOutOfRange { floor: 2, n: 1 })
        ));
        assert!(matches!(
            ProblemInstance::new(vec![f64::NAN], vec![1.0], 1.0, 0),
            Err(InstanceError::NonFiniteEntry {
                field: "values",
                ..
            })
        ));
        assert!(matches!(
            ProblemInstance::new(vec![], vec![], 1.0, 0),
            Err(InstanceError::Empty)
        ));
    }

    #[test]
    fn coverage_cost_and_feasibility() {
        let inst = six_units();
        assert_eq!(inst.min_coverage_cost(), 4.0);
        assert!(inst.is_feasible());
        assert_eq!(inst.v_max(), 20.0);
        assert_eq!(inst.w_min(), 2.0);
        assert_eq!(inst.w_max(), 10.0);

        let k0 = ProblemInstance::new(vec![1.0, 1.0], vec![5.0, 3.0], 1.0, 0).unwrap();
        assert_eq!(k0.min_coverage_cost(), 0.0);
        assert!(k0.is_feasible());

        let three = ProblemInstance::new(vec![0.0; 3], vec![3.0, 1.0, 2.0], 10.0, 2).unwrap();
        assert_eq!(three.min_coverage_cost(), 3.0);

        let pair = ProblemInstance::new(vec![1.0, 1.0], vec![10.0, 9.0], 12.0, 2).unwrap();
        assert!(!pair.is_feasible());
        assert!(matches!(
            pair.ensure_feasible(),
            Err(SolveError::Infeasible { .. })
        ));
    }

    #[test]
    fn scores() {
        let inst = six_units();
        assert!((inst.lagrangian_score(2, DualPrices::new(1.2, 0.0)) - 9.2).abs() < 1e-12);
        assert!((inst.lagrangian_score(0, DualPrices::new(0.2, 0.0)) - 18.0).abs() < 1e-12);
        for i in 0..inst.len() {
            assert_eq!(inst.lagrangian_score(i, DualPrices::ZERO), inst.values()[i]);
        }
    }

    #[test]
    fn threshold_rule() {
        let inst = six_units();
        assert_eq!(threshold_policy(&inst, DualPrices::ZERO).count(), 6);
        assert_eq!(
            threshold_policy(&inst, DualPrices::new(1.2, 0.0)).count(),
            6
        );
        let signs = ProblemInstance::new(vec![-1.0, 2.0], vec![1.0, 1.0], 1.0, 0).unwrap();
        assert_eq!(
            threshold_policy(&signs, DualPrices::ZERO).decisions(),
            &[false, true]
        );
        // score exactly zero is selected
        let tie = ProblemInstance::new(vec![2.0], vec![1.0], 1.0, 0).unwrap();
        assert!(threshold_policy(&tie, DualPrices::new(2.0, 0.0)).is_treated(0));
    }

    #[test]
    fn metrics() {
        let inst = six_units();
        let m = allocation_metrics(&inst, &[false, false, true, true, true, true]).unwrap();
        assert_eq!(
            (m.value, m.cost, m.count, m.feasible),
            (42.0, 12.0, 4, true)
        );
        let m = allocation_metrics(&inst, &[false; 6]).unwrap();
        assert_eq!((m.value, m.cost, m.count, m.feasible), (0.0, 0.0, 0, false));
        let m = allocation_metrics(&inst, &[true, true, false, false, false, false]).unwrap();
        assert_eq!((m.value, m.cost, m.feasible), (38.0, 19.0, false));
        assert!(matches!(
            allocation_metrics(&inst, &[true]),
            Err(SolveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn per_capita_conversion() {
        let inst =
            ProblemInstance::from_per_capita(vec![1.0; 10], vec![1.0; 10], 0.6, 0.33).unwrap();
        assert!((inst.budget() - 6.0).abs() < 1e-12);
        assert_eq!(inst.coverage_floor(), 4);
        assert_eq!(coverage_floor_for(500, 0.3), 150);
        assert_eq!(coverage_floor_for(50, 0.0), 0);
    }
}
